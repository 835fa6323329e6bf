#include "lipnovo/chem.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace lipnovo::chem {

namespace {

struct ResidueDef {
  const char* symbol;
  double mass;
  bool ptm;
};

// Monoisotopic residue masses (residue = amino acid minus water). PTM rows
// carry the base mass plus the modification delta. The PTM string notation
// follows the MGF convention used by the benchmark releases.
constexpr ResidueDef kResidues[] = {
    {"A", 71.037114, false},
    {"C", 103.009185, false},
    {"D", 115.026943, false},
    {"E", 129.042593, false},
    {"F", 147.068414, false},
    {"G", 57.021464, false},
    {"H", 137.058912, false},
    {"I", 113.084064, false},
    {"K", 128.094963, false},
    {"L", 113.084064, false},
    {"M", 131.040485, false},
    {"N", 114.042927, false},
    {"P", 97.052764, false},
    {"Q", 128.058578, false},
    {"R", 156.101111, false},
    {"S", 87.032028, false},
    {"T", 101.047678, false},
    {"V", 99.068414, false},
    {"W", 186.079313, false},
    {"Y", 163.063329, false},
    {"M(+15.99)", 131.040485 + kOxidationDelta, true},
    {"N(+.98)", 114.042927 + kDeamidationDelta, true},
    {"Q(+.98)", 128.058578 + kDeamidationDelta, true},
};

constexpr const char* kStopSymbol = "[$]";

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& def : kResidues) {
    symbols_.push_back(def.symbol);
    masses_.push_back(def.mass);
    ptm_.push_back(def.ptm);
  }
  symbols_.push_back(kStopSymbol);
  masses_.push_back(std::numeric_limits<double>::quiet_NaN());
  ptm_.push_back(false);
}

const Vocabulary& Vocabulary::instance() {
  static const Vocabulary vocab;
  return vocab;
}

const std::string& Vocabulary::symbol(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw VocabularyError("token id out of range: " + std::to_string(id));
  }
  return symbols_[id];
}

double Vocabulary::residue_mass(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw VocabularyError("token id out of range: " + std::to_string(id));
  }
  if (is_stop(id)) {
    throw VocabularyError("stop token has no residue mass");
  }
  return masses_[id];
}

bool Vocabulary::is_ptm(TokenId id) const {
  if (id < 0 || id >= size()) {
    throw VocabularyError("token id out of range: " + std::to_string(id));
  }
  return ptm_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view symbol) const {
  for (int i = 0; i < size(); ++i) {
    if (symbols_[i] == symbol) return i;
  }
  return std::nullopt;
}

std::string Vocabulary::mass_table_text() const {
  std::string out = "# lipnovo monoisotopic residue masses v1\n";
  char buf[64];
  for (int i = 0; i < size(); ++i) {
    if (is_stop(i)) continue;
    std::snprintf(buf, sizeof(buf), "%s\t%.6f\n", symbols_[i].c_str(), masses_[i]);
    out += buf;
  }
  return out;
}

Peptide::Peptide(std::vector<TokenId> residues) : residues_(std::move(residues)) {
  if (residues_.empty()) {
    throw std::invalid_argument("peptide must contain at least one residue");
  }
  if (static_cast<int>(residues_.size()) > kMaxPeptideLength) {
    throw std::invalid_argument("peptide exceeds maximum length " +
                                std::to_string(kMaxPeptideLength));
  }
  const auto& vocab = Vocabulary::instance();
  for (TokenId id : residues_) {
    if (id < 0 || id >= vocab.size() || vocab.is_stop(id)) {
      throw VocabularyError("invalid residue token in peptide: " + std::to_string(id));
    }
  }
}

Peptide Peptide::from_string(std::string_view text) {
  const auto& vocab = Vocabulary::instance();
  std::vector<TokenId> residues;
  size_t i = 0;
  while (i < text.size()) {
    if (!std::isupper(static_cast<unsigned char>(text[i]))) {
      throw VocabularyError("unexpected character in peptide string at position " +
                            std::to_string(i));
    }
    size_t end = i + 1;
    if (end < text.size() && text[end] == '(') {
      size_t close = text.find(')', end);
      if (close == std::string_view::npos) {
        throw VocabularyError("unterminated modification in peptide string");
      }
      end = close + 1;
    }
    auto id = vocab.find(text.substr(i, end - i));
    if (!id) {
      throw VocabularyError("unknown residue symbol: " +
                            std::string(text.substr(i, end - i)));
    }
    residues.push_back(*id);
    i = end;
  }
  return Peptide(std::move(residues));
}

std::string Peptide::to_string() const {
  const auto& vocab = Vocabulary::instance();
  std::string out;
  for (TokenId id : residues_) out += vocab.symbol(id);
  return out;
}

void Spectrum::validate() const {
  for (const auto& p : peaks) {
    if (!(p.mz > 0.0)) {
      throw std::invalid_argument("spectrum peak m/z must be strictly positive");
    }
    if (p.intensity < 0.0 || !std::isfinite(p.intensity)) {
      throw std::invalid_argument("spectrum peak intensity must be non-negative");
    }
  }
  if (precursor_charge < 1 || precursor_charge > 10) {
    throw std::invalid_argument("precursor charge must be in 1..10");
  }
  if (!(precursor_mz > 0.0)) {
    throw std::invalid_argument("precursor m/z must be strictly positive");
  }
}

double residue_mass(TokenId token) {
  return Vocabulary::instance().residue_mass(token);
}

double peptide_mass(const Peptide& peptide) {
  double sum = kWaterMass;
  for (TokenId id : peptide.residues()) sum += residue_mass(id);
  return sum;
}

TheoreticalSpectrum theoretical_spectrum(const Peptide& peptide,
                                         double reference_intensity) {
  const int L = peptide.length();
  if (L < 2) {
    throw std::domain_error("theoretical spectrum requires peptide length >= 2");
  }
  if (!(reference_intensity > 0.0)) {
    throw std::invalid_argument("reference intensity must be positive");
  }
  const auto& residues = peptide.residues();

  // Prefix sums of residue masses; prefix[k] = mass of residues [0, k).
  std::vector<double> prefix(L + 1, 0.0);
  for (int i = 0; i < L; ++i) prefix[i + 1] = prefix[i] + residue_mass(residues[i]);
  const double total = prefix[L];

  TheoreticalSpectrum out;
  out.peaks.reserve(2 * (L - 1));
  out.ion_labels.reserve(2 * (L - 1));
  for (int k = 1; k <= L - 1; ++k) {
    // b_k: prefix of length k at charge +1; y_k: suffix of length k.
    out.peaks.push_back({prefix[k] + kProtonMass, reference_intensity});
    out.ion_labels.push_back({'b', k});
    out.peaks.push_back({total - prefix[L - k] + kWaterMass + kProtonMass,
                         reference_intensity});
    out.ion_labels.push_back({'y', k});
  }
  return out;
}

Spectrum complementary_spectrum(const Spectrum& spectrum) {
  Spectrum out;
  out.precursor_mz = spectrum.precursor_mz;
  out.precursor_charge = spectrum.precursor_charge;
  const double pivot = spectrum.precursor_neutral_mass() + 2.0 * kProtonMass;
  out.peaks.reserve(spectrum.peaks.size());
  for (const auto& p : spectrum.peaks) {
    const double mz = pivot - p.mz;
    if (mz > 0.0) out.peaks.push_back({mz, p.intensity});
  }
  return out;
}

}  // namespace lipnovo::chem
