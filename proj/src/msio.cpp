#include "lipnovo/msio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace lipnovo::msio {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string_view trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_double(std::string_view s, double* out) {
  try {
    size_t pos = 0;
    std::string str(s);
    *out = std::stod(str, &pos);
    return pos == str.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

bool AnnotatedSpectrum::precursor_consistent(double tol) const {
  if (!peptide) return true;
  return std::abs(chem::peptide_mass(*peptide) - spectrum.precursor_neutral_mass()) <= tol;
}

MgfParseResult parse_mgf(std::istream& in) {
  if (in.fail()) {
    throw std::runtime_error("mgf: unreadable input stream");
  }
  MgfParseResult result;

  std::string line;
  size_t line_no = 0;
  size_t record_start = 0;
  bool in_record = false;
  bool have_pepmass = false, have_charge = false;
  double pepmass = 0.0;
  int charge = 0;
  std::string title, seq;
  std::vector<chem::Peak> peaks;
  std::string record_error;
  size_t anonymous_index = 0;

  auto reset_record = [&]() {
    in_record = false;
    have_pepmass = have_charge = false;
    pepmass = 0.0;
    charge = 0;
    title.clear();
    seq.clear();
    peaks.clear();
    record_error.clear();
  };

  auto fail_record = [&](const std::string& msg) {
    if (record_error.empty()) record_error = msg;
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;

    if (sv == "BEGIN IONS") {
      if (in_record) {
        result.errors.push_back({record_start, "record not terminated before next BEGIN IONS"});
      }
      reset_record();
      in_record = true;
      record_start = line_no;
      continue;
    }
    if (sv == "END IONS") {
      if (!in_record) {
        result.errors.push_back({line_no, "END IONS without BEGIN IONS"});
        continue;
      }
      if (!have_pepmass) fail_record("missing PEPMASS");
      if (!have_charge) fail_record("missing CHARGE");
      if (record_error.empty()) {
        try {
          AnnotatedSpectrum rec;
          rec.spectrum.peaks = peaks;
          rec.spectrum.precursor_mz = pepmass;
          rec.spectrum.precursor_charge = charge;
          rec.spectrum.validate();
          if (!seq.empty()) rec.peptide = chem::Peptide::from_string(seq);
          rec.source_id =
              title.empty() ? "record-" + std::to_string(anonymous_index) : title;
          result.records.push_back(std::move(rec));
        } catch (const std::exception& e) {
          fail_record(e.what());
        }
      }
      if (!record_error.empty()) {
        result.errors.push_back({record_start, record_error});
      }
      ++anonymous_index;
      reset_record();
      continue;
    }
    if (!in_record) continue;  // headers outside records are ignored

    size_t eq = sv.find('=');
    if (eq != std::string_view::npos && sv.find(' ') > eq) {
      std::string_view key = sv.substr(0, eq);
      std::string_view value = trim(sv.substr(eq + 1));
      if (key == "PEPMASS") {
        // PEPMASS may carry a trailing intensity; the first field is the m/z.
        std::string_view first = value.substr(0, value.find_first_of(" \t"));
        if (!parse_double(first, &pepmass)) {
          fail_record("bad PEPMASS value");
        } else {
          have_pepmass = true;
        }
      } else if (key == "CHARGE") {
        std::string v(value);
        if (!v.empty() && (v.back() == '+' || v.back() == '-')) v.pop_back();
        try {
          charge = std::stoi(v);
          have_charge = true;
        } catch (const std::exception&) {
          fail_record("bad CHARGE value");
        }
      } else if (key == "SEQ") {
        seq = std::string(value);
      } else if (key == "TITLE") {
        title = std::string(value);
      }
      // other headers (RTINSECONDS, SCANS, ...) are ignored
      continue;
    }

    // Peak line: "mz intensity".
    std::istringstream ps{std::string(sv)};
    double mz = 0.0, inten = 0.0;
    if (ps >> mz >> inten) {
      peaks.push_back({mz, inten});
    } else {
      fail_record("unparseable peak line");
    }
  }
  if (in_record) {
    result.errors.push_back({record_start, "unterminated record at end of input"});
  }
  return result;
}

MgfParseResult parse_mgf_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("mgf: cannot open " + path);
  return parse_mgf(in);
}

void write_mgf(const std::vector<AnnotatedSpectrum>& records, std::ostream& out) {
  for (const auto& rec : records) {
    out << "BEGIN IONS\n";
    out << "TITLE=" << rec.source_id << "\n";
    out << "PEPMASS=" << fmt_double(rec.spectrum.precursor_mz) << "\n";
    out << "CHARGE=" << rec.spectrum.precursor_charge << "+\n";
    if (rec.peptide) out << "SEQ=" << rec.peptide->to_string() << "\n";
    for (const auto& p : rec.spectrum.peaks) {
      out << fmt_double(p.mz) << " " << fmt_double(p.intensity) << "\n";
    }
    out << "END IONS\n";
  }
  if (!out) throw std::runtime_error("mgf: write failed");
}

void write_mgf_file(const std::vector<AnnotatedSpectrum>& records,
                    const std::string& path) {
  std::ostringstream buf;
  write_mgf(records, buf);
  atomic_write_file(path, buf.str());
}

chem::Spectrum preprocess(const chem::Spectrum& spectrum, const PreprocessConfig& cfg) {
  chem::Spectrum out;
  out.precursor_mz = spectrum.precursor_mz;
  out.precursor_charge = spectrum.precursor_charge;

  double max_intensity = 0.0;
  for (const auto& p : spectrum.peaks) max_intensity = std::max(max_intensity, p.intensity);

  for (const auto& p : spectrum.peaks) {
    if (p.mz < cfg.mz_min || p.mz > cfg.mz_max) continue;
    if (std::abs(p.mz - spectrum.precursor_mz) <= cfg.precursor_window) continue;
    if (max_intensity > 0.0 && p.intensity < cfg.min_rel_intensity * max_intensity) continue;
    out.peaks.push_back(p);
  }

  if (static_cast<int>(out.peaks.size()) > cfg.max_peaks) {
    std::stable_sort(out.peaks.begin(), out.peaks.end(),
                     [](const chem::Peak& a, const chem::Peak& b) {
                       return a.intensity > b.intensity;
                     });
    out.peaks.resize(cfg.max_peaks);
  }

  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const chem::Peak& a, const chem::Peak& b) { return a.mz < b.mz; });

  double norm_sq = 0.0;
  for (auto& p : out.peaks) {
    p.intensity = std::sqrt(p.intensity);
    norm_sq += p.intensity * p.intensity;
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& p : out.peaks) p.intensity *= inv;
  }
  return out;
}

void SynthParams::validate() const {
  if (n_psms <= 0) throw std::invalid_argument("synth: n_psms must be positive");
  if (len_min < 2 || len_max < len_min || len_max > chem::kMaxPeptideLength) {
    throw std::invalid_argument("synth: bad peptide length range");
  }
  if (ptm_prob < 0.0 || ptm_prob > 1.0) throw std::invalid_argument("synth: bad ptm_prob");
  if (missing_ratio < 0.0 || missing_ratio > 1.0) {
    throw std::invalid_argument("synth: missing ratio must be in [0,1]");
  }
  if (noise_peaks_min < 0 || noise_peaks_max < noise_peaks_min) {
    throw std::invalid_argument("synth: bad noise peak range");
  }
  if (charge_min < 1 || charge_max > 10 || charge_max < charge_min) {
    throw std::invalid_argument("synth: bad charge range");
  }
  const double sum = fractions[0] + fractions[1] + fractions[2];
  if (fractions[0] < 0 || fractions[1] < 0 || fractions[2] < 0 ||
      std::abs(sum - 1.0) > 1e-6) {
    throw std::invalid_argument("synth: split fractions must be non-negative and sum to 1");
  }
}

namespace {

chem::Peptide sample_peptide(const SynthParams& params, Rng& rng) {
  const auto& vocab = chem::Vocabulary::instance();
  const int len = rng.uniform_int(params.len_min, params.len_max);
  static const chem::TokenId kCanonical[] = {
      *vocab.find("A"), *vocab.find("C"), *vocab.find("D"), *vocab.find("E"),
      *vocab.find("F"), *vocab.find("G"), *vocab.find("H"), *vocab.find("I"),
      *vocab.find("K"), *vocab.find("L"), *vocab.find("M"), *vocab.find("N"),
      *vocab.find("P"), *vocab.find("Q"), *vocab.find("R"), *vocab.find("S"),
      *vocab.find("T"), *vocab.find("V"), *vocab.find("W"), *vocab.find("Y")};
  const chem::TokenId m_ox = *vocab.find("M(+15.99)");
  const chem::TokenId n_deam = *vocab.find("N(+.98)");
  const chem::TokenId q_deam = *vocab.find("Q(+.98)");
  const chem::TokenId m_id = *vocab.find("M");
  const chem::TokenId n_id = *vocab.find("N");
  const chem::TokenId q_id = *vocab.find("Q");

  std::vector<chem::TokenId> residues(len);
  for (auto& r : residues) {
    r = kCanonical[rng.uniform_int(static_cast<uint64_t>(20))];
    if ((r == m_id || r == n_id || r == q_id) && rng.bernoulli(params.ptm_prob)) {
      r = (r == m_id) ? m_ox : (r == n_id ? n_deam : q_deam);
    }
  }
  return chem::Peptide(std::move(residues));
}

AnnotatedSpectrum sample_psm(const SynthParams& params, Rng& rng, int index) {
  AnnotatedSpectrum rec;
  chem::Peptide peptide = sample_peptide(params, rng);
  const double neutral = chem::peptide_mass(peptide);
  const int charge = rng.uniform_int(params.charge_min, params.charge_max);

  rec.spectrum.precursor_charge = charge;
  rec.spectrum.precursor_mz = (neutral + charge * chem::kProtonMass) / charge;

  const auto theory = chem::theoretical_spectrum(peptide, 1.0);
  double max_mz = 0.0;
  for (const auto& p : theory.peaks) {
    max_mz = std::max(max_mz, p.mz);
    if (rng.bernoulli(params.missing_ratio)) continue;
    chem::Peak peak;
    peak.mz = std::max(1.0, p.mz + rng.normal(0.0, params.mz_jitter));
    peak.intensity =
        std::max(0.05, 1.0 + params.intensity_noise * rng.normal());
    rec.spectrum.peaks.push_back(peak);
  }

  const int n_noise = rng.uniform_int(params.noise_peaks_min, params.noise_peaks_max);
  for (int i = 0; i < n_noise; ++i) {
    chem::Peak peak;
    peak.mz = rng.uniform(50.0, std::max(200.0, max_mz * 1.05));
    peak.intensity = std::max(0.05, 1.0 + params.intensity_noise * rng.normal());
    rec.spectrum.peaks.push_back(peak);
  }
  std::sort(rec.spectrum.peaks.begin(), rec.spectrum.peaks.end(),
            [](const chem::Peak& a, const chem::Peak& b) { return a.mz < b.mz; });

  rec.peptide = std::move(peptide);

  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth-%06d", index);
  rec.source_id = buf;
  return rec;
}

}  // namespace

DatasetSplit synth_dataset(const SynthParams& params, uint64_t seed) {
  params.validate();
  Rng root(seed);

  std::vector<AnnotatedSpectrum> all;
  all.reserve(params.n_psms);
  for (int i = 0; i < params.n_psms; ++i) {
    // Per-PSM stream so generation order is irrelevant to the content.
    Rng psm_rng = root.fork(static_cast<uint64_t>(i) + 1);
    all.push_back(sample_psm(params, psm_rng, i));
  }

  const int n = params.n_psms;
  const int n_train = static_cast<int>(std::lround(params.fractions[0] * n));
  const int n_val = static_cast<int>(std::lround(params.fractions[1] * n));

  DatasetSplit split;
  for (int i = 0; i < n; ++i) {
    if (i < n_train) {
      split.train.push_back(std::move(all[i]));
    } else if (i < n_train + n_val) {
      split.validation.push_back(std::move(all[i]));
    } else {
      split.test.push_back(std::move(all[i]));
    }
  }
  return split;
}

double missing_ratio(const chem::Spectrum& spectrum, const chem::Peptide& peptide,
                     double tol) {
  const auto theory = chem::theoretical_spectrum(peptide, 1.0);
  int absent = 0;
  for (const auto& ideal : theory.peaks) {
    bool present = false;
    for (const auto& p : spectrum.peaks) {
      if (std::abs(p.mz - ideal.mz) <= tol) {
        present = true;
        break;
      }
    }
    if (!present) ++absent;
  }
  return static_cast<double>(absent) / static_cast<double>(theory.peaks.size());
}

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("manifest: bad JSON in " + path + ": " + e.what());
  }
  Manifest m;
  auto read_list = [&](const char* key, std::vector<std::string>* out) {
    if (!j.contains(key)) return;
    for (const auto& item : j.at(key)) out->push_back(item.get<std::string>());
  };
  read_list("train", &m.train);
  read_list("validation", &m.validation);
  read_list("test", &m.test);
  return m;
}

void write_manifest(const Manifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["train"] = manifest.train;
  j["validation"] = manifest.validation;
  j["test"] = manifest.test;
  atomic_write_file(path, j.dump(2) + "\n");
}

std::vector<AnnotatedSpectrum> load_split(const std::vector<std::string>& paths,
                                          std::vector<MgfError>* errors) {
  std::vector<AnnotatedSpectrum> out;
  for (const auto& path : paths) {
    auto result = parse_mgf_file(path);
    for (auto& rec : result.records) out.push_back(std::move(rec));
    if (errors) {
      for (auto& e : result.errors) errors->push_back(std::move(e));
    }
  }
  return out;
}

void atomic_write_file(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

}  // namespace lipnovo::msio
