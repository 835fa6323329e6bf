// Amino-acid vocabulary, monoisotopic mass arithmetic, and theoretical /
// complementary spectrum generation. All functions here are pure and
// thread-safe.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lipnovo::chem {

// Monoisotopic constants (Da).
inline constexpr double kProtonMass = 1.007276;
inline constexpr double kWaterMass = 18.010565;
inline constexpr double kOxidationDelta = 15.994915;
inline constexpr double kDeamidationDelta = 0.984016;

using TokenId = int;

class VocabularyError : public std::runtime_error {
public:
  explicit VocabularyError(const std::string& what) : std::runtime_error(what) {}
};

// 20 canonical residues, 3 PTM variants, and the stop token "[$]".
// Token ids are stable across releases; the stop token is always last.
class Vocabulary {
public:
  static const Vocabulary& instance();

  int size() const { return static_cast<int>(symbols_.size()); }
  TokenId stop_id() const { return size() - 1; }

  const std::string& symbol(TokenId id) const;
  // Monoisotopic residue mass; throws VocabularyError for the stop token.
  double residue_mass(TokenId id) const;
  bool is_stop(TokenId id) const { return id == stop_id(); }
  bool is_ptm(TokenId id) const;

  std::optional<TokenId> find(std::string_view symbol) const;

  // Human-readable "symbol<TAB>mass" dump matching the bundled constants file.
  std::string mass_table_text() const;

private:
  Vocabulary();
  std::vector<std::string> symbols_;
  std::vector<double> masses_;  // stop slot holds a poison value
  std::vector<bool> ptm_;
};

// Residue sequence without the stop token. Enforces 1 <= L <= kMaxPeptideLength.
inline constexpr int kMaxPeptideLength = 100;

class Peptide {
public:
  explicit Peptide(std::vector<TokenId> residues);

  // Parses the string notation used in MGF SEQ lines, e.g. "PEM(+15.99)TIDE".
  static Peptide from_string(std::string_view text);

  const std::vector<TokenId>& residues() const { return residues_; }
  int length() const { return static_cast<int>(residues_.size()); }
  std::string to_string() const;

  bool operator==(const Peptide&) const = default;

private:
  std::vector<TokenId> residues_;
};

struct Peak {
  double mz = 0.0;
  double intensity = 0.0;
};

// Observed MS2 spectrum. precursor_mz is the measured precursor m/z (as in an
// MGF PEPMASS line); the neutral mass is derived from it and the charge.
struct Spectrum {
  std::vector<Peak> peaks;
  double precursor_mz = 0.0;
  int precursor_charge = 1;

  double precursor_neutral_mass() const {
    return precursor_mz * precursor_charge - precursor_charge * kProtonMass;
  }
  // Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

struct IonLabel {
  char series = 'b';  // 'b' or 'y'
  int index = 0;      // 1..L-1
};

// Ideal b/y fragmentation of a peptide: 2(L-1) singly charged peaks, all at
// the same reference intensity, ordered b1, y1, b2, y2, ...
struct TheoreticalSpectrum {
  std::vector<Peak> peaks;
  std::vector<IonLabel> ion_labels;
};

double residue_mass(TokenId token);

// Neutral monoisotopic peptide mass: sum of residue masses plus water.
double peptide_mass(const Peptide& peptide);

// Requires L >= 2 (a single residue has no backbone cleavage).
TheoreticalSpectrum theoretical_spectrum(const Peptide& peptide,
                                         double reference_intensity = 1.0);

// Maps every observed peak (m, I) to (M_neutral + 2*proton - m, I); peaks whose
// complementary m/z would be non-positive are dropped. Precursor fields are
// copied through unchanged.
Spectrum complementary_spectrum(const Spectrum& spectrum);

}  // namespace lipnovo::chem
