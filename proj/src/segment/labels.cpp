#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <unordered_map>

#include "atrophy/error.hpp"
#include "atrophy/imgvol/nifti.hpp"
#include "atrophy/segment/segment.hpp"
#include "atrophy/util/csv.hpp"

namespace atrophy {

const std::vector<std::pair<std::string, Tissue>>& canonical_structures() {
  static const std::vector<std::pair<std::string, Tissue>> table{
      {"lateral ventricle", kCSF},
      {"inferior lateral ventricle", kCSF},
      {"third ventricle", kCSF},
      {"fourth ventricle", kCSF},
      {"outer csf", kCSF},
      {"cerebral cortex", kGM},
      {"thalamus", kGM},
      {"caudate", kGM},
      {"putamen", kGM},
      {"pallidum", kGM},
      {"hippocampus", kGM},
      {"amygdala", kGM},
      {"cerebellar cortex", kGM},
      {"accumbens", kGM},
      {"ventral diencephalon", kGM},
      {"cerebral white matter", kWM},
      {"cerebellar white matter", kWM},
      {"brainstem", kWM},
  };
  return table;
}

namespace {

// Spellings in common label-map codebooks, mapped to canonical names.
const std::unordered_map<std::string, std::string>& aliases() {
  static const std::unordered_map<std::string, std::string> m{
      {"lateral vent", "lateral ventricle"},
      {"inf lat vent", "inferior lateral ventricle"},
      {"inferior lateral vent", "inferior lateral ventricle"},
      {"3rd ventricle", "third ventricle"},
      {"4th ventricle", "fourth ventricle"},
      {"csf", "outer csf"},
      {"extracerebral csf", "outer csf"},
      {"cerebral cortex gm", "cerebral cortex"},
      {"thalamus proper", "thalamus"},
      {"caudate nucleus", "caudate"},
      {"cerebellum cortex", "cerebellar cortex"},
      {"accumbens area", "accumbens"},
      {"ventraldc", "ventral diencephalon"},
      {"ventral dc", "ventral diencephalon"},
      {"cerebellum white matter", "cerebellar white matter"},
      {"brain stem", "brainstem"},
  };
  return m;
}

}  // namespace

std::string normalize_structure_name(std::string_view name) {
  std::string out;
  bool space = false;
  for (char ch : name) {
    char c = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (c == '-' || c == '_' || std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out += ' ';
    space = false;
    out += c;
  }
  return out;
}

std::optional<Tissue> tissue_for_structure(std::string_view name) {
  std::string n = normalize_structure_name(name);
  for (const char* prefix : {"left ", "right ", "lh ", "rh "}) {
    const std::string_view p(prefix);
    if (n.size() > p.size() && n.compare(0, p.size(), p) == 0) {
      n = n.substr(p.size());
      break;
    }
  }
  if (auto it = aliases().find(n); it != aliases().end()) n = it->second;
  for (const auto& [canon, tissue] : canonical_structures()) {
    if (canon == n) return tissue;
  }
  return std::nullopt;
}

AggregationResult aggregate_labels(const AnatomicalLabelMap& a, const BinaryMask* brain) {
  if (a.labels.size() != a.grid.size()) throw Error("label map length does not match grid");
  if (brain != nullptr && !brain->grid().matches(a.grid, 1e-3)) {
    throw Error("label aggregation: brain mask grid mismatch");
  }
  std::unordered_map<std::int32_t, Tissue> resolved;
  for (const auto& [code, name] : a.code_names) {
    if (auto t = tissue_for_structure(name)) resolved[code] = *t;
  }
  std::set<std::int32_t> unmapped;
  std::vector<std::uint8_t> out(a.labels.size(), kBG);
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const std::int32_t code = a.labels[i];
    if (code == 0) continue;
    const auto it = resolved.find(code);
    if (it == resolved.end()) {
      unmapped.insert(code);
      continue;
    }
    if (brain != nullptr && !(*brain)[i]) continue;
    out[i] = it->second;
  }
  AggregationResult r;
  r.seg = TissueSegmentation(a.grid, std::move(out));
  r.unmapped_codes.assign(unmapped.begin(), unmapped.end());
  return r;
}

std::map<std::int32_t, std::string> read_codebook(const std::filesystem::path& path) {
  CsvTable t;
  try {
    t = read_csv(path);
  } catch (const Error& e) {
    throw Error(std::string("codebook parse failure: ") + e.what());
  }
  if (t.header.size() != 2 || normalize_structure_name(t.header[0]) != "code" ||
      normalize_structure_name(t.header[1]) != "name") {
    throw Error("codebook parse failure: " + path.string() + " must have header code,name");
  }
  std::map<std::int32_t, std::string> out;
  for (const auto& row : t.rows) {
    std::size_t used = 0;
    long code = 0;
    try {
      code = std::stol(row[0], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != row[0].size() || row[0].empty() || code < 0 || code > INT32_MAX) {
      throw Error("codebook parse failure: invalid code '" + row[0] + "' in " + path.string());
    }
    if (!out.emplace(static_cast<std::int32_t>(code), row[1]).second) {
      throw Error("codebook parse failure: duplicate code " + row[0] + " in " + path.string());
    }
  }
  return out;
}

AnatomicalLabelMap load_external_labelmap(const std::filesystem::path& path,
                                          const std::filesystem::path& codebook) {
  NiftiImage img = read_nifti(path);
  if (img.datatype == NiftiType::Float32) {
    throw Error("non-integer labels: " + path.string() + " uses a floating-point datatype");
  }
  AnatomicalLabelMap m;
  m.grid = img.volume.grid();
  m.labels.resize(img.volume.size());
  for (std::size_t i = 0; i < m.labels.size(); ++i) {
    const double x = img.volume[i];
    if (x < 0 || x != std::floor(x)) throw Error("non-integer labels: " + path.string());
    m.labels[i] = static_cast<std::int32_t>(x);
  }
  m.code_names = read_codebook(codebook);
  return m;
}

}  // namespace atrophy
