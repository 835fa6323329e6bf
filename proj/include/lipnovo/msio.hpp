// Spectrum file parsing/writing, preprocessing, dataset assembly, synthetic
// PSM generation, and missing-ratio computation.
#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lipnovo/chem.hpp"
#include "lipnovo/rng.hpp"

namespace lipnovo::msio {

struct AnnotatedSpectrum {
  chem::Spectrum spectrum;
  std::optional<chem::Peptide> peptide;
  std::string source_id;

  // True when there is no annotation or the annotated peptide mass lies within
  // `tol` Da of the precursor neutral mass.
  bool precursor_consistent(double tol) const;
};

struct DatasetSplit {
  std::vector<AnnotatedSpectrum> train;
  std::vector<AnnotatedSpectrum> validation;
  std::vector<AnnotatedSpectrum> test;
};

struct MgfError {
  size_t line = 0;
  std::string message;
};

struct MgfParseResult {
  std::vector<AnnotatedSpectrum> records;
  std::vector<MgfError> errors;  // one entry per skipped record
};

// Parses MGF text (BEGIN IONS / END IONS records with PEPMASS, CHARGE,
// optional TITLE and SEQ, and "mz intensity" peak lines). Malformed records
// are skipped and reported with their starting line number; a stream in a
// failed state raises std::runtime_error.
MgfParseResult parse_mgf(std::istream& in);
MgfParseResult parse_mgf_file(const std::string& path);

// Emits MGF such that parse_mgf reproduces the records exactly (floats are
// rendered with round-trip precision). Records without annotation get no SEQ
// line.
void write_mgf(const std::vector<AnnotatedSpectrum>& records, std::ostream& out);
void write_mgf_file(const std::vector<AnnotatedSpectrum>& records,
                    const std::string& path);

struct PreprocessConfig {
  int max_peaks = 150;
  double mz_min = 50.0;
  double mz_max = 2500.0;
  double min_rel_intensity = 0.01;
  // Peaks within this window (Da) of the precursor m/z are removed.
  double precursor_window = 2.0;
};

// Filters, intensity-transforms (sqrt then unit Euclidean norm) and sorts a
// spectrum by ascending m/z. Returns an empty-peak spectrum when everything is
// filtered out; callers are expected to skip such PSMs.
chem::Spectrum preprocess(const chem::Spectrum& spectrum, const PreprocessConfig& cfg);

struct SynthParams {
  int n_psms = 1000;
  int len_min = 5;
  int len_max = 12;
  double ptm_prob = 0.05;        // per eligible residue (M, N, Q)
  double missing_ratio = 0.3;    // independent drop probability per ideal peak
  int noise_peaks_min = 0;
  int noise_peaks_max = 5;
  double mz_jitter = 0.005;      // Gaussian sigma in Da
  double intensity_noise = 0.3;  // relative spread of fragment intensities
  int charge_min = 1;
  int charge_max = 3;
  double fractions[3] = {0.8, 0.1, 0.1};  // train / validation / test

  void validate() const;  // throws std::invalid_argument
};

// Deterministic in (params, seed). Split membership is by position: the first
// round(f_train*n) PSMs form the train split, and so on; source ids are unique
// across the dataset.
DatasetSplit synth_dataset(const SynthParams& params, uint64_t seed);

// Fraction of the 2(L-1) ideal b/y peaks with no observed peak within `tol`
// Da. Requires L >= 2.
double missing_ratio(const chem::Spectrum& spectrum, const chem::Peptide& peptide,
                     double tol = 0.05);

// Dataset manifest: JSON file listing MGF paths per split.
struct Manifest {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
};

Manifest read_manifest(const std::string& path);
void write_manifest(const Manifest& manifest, const std::string& path);

// Loads and concatenates all MGF files of one split; parse errors accumulate
// into `errors` if given.
std::vector<AnnotatedSpectrum> load_split(const std::vector<std::string>& paths,
                                          std::vector<MgfError>* errors = nullptr);

// Writes a file atomically (temp file in the same directory, then rename).
void atomic_write_file(const std::string& path, const std::string& contents);

}  // namespace lipnovo::msio
