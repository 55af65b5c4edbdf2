#include "atrophy/harness/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "atrophy/error.hpp"
#include "atrophy/util/csv.hpp"

namespace atrophy {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

}  // namespace

SubjectManifest parse_manifest(std::string_view text, const std::filesystem::path& base_dir) {
  const CsvTable t = parse_csv(text);
  const int c_id = t.column("subject_id"), c_t0 = t.column("t0"), c_t1 = t.column("t1");
  if (c_id < 0 || c_t0 < 0 || c_t1 < 0) {
    throw Error("manifest: header must contain subject_id,t0,t1");
  }
  const int c_m0 = t.column("mask_t0"), c_m1 = t.column("mask_t1");
  const int c_l0 = t.column("labelmap_t0"), c_l1 = t.column("labelmap_t1");
  SubjectManifest m;
  m.base_dir = base_dir;
  std::set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) {
      throw Error("manifest: row " + std::to_string(r + 2) + " has " + std::to_string(row.size()) +
                  " fields, expected " + std::to_string(t.header.size()));
    }
    auto field = [&](int c) { return c < 0 ? std::string() : row[static_cast<std::size_t>(c)]; };
    auto optional_path = [&](int c) -> std::optional<std::filesystem::path> {
      const std::string f = field(c);
      if (f.empty()) return std::nullopt;
      return resolve(base_dir, f);
    };
    ManifestRow mr;
    mr.subject_id = field(c_id);
    if (mr.subject_id.empty() || field(c_t0).empty() || field(c_t1).empty()) {
      throw Error("manifest: row " + std::to_string(r + 2) + " lacks subject_id, t0 or t1");
    }
    if (!seen.insert(mr.subject_id).second) {
      throw Error("manifest: duplicate subject_id '" + mr.subject_id + "'");
    }
    mr.t0 = resolve(base_dir, field(c_t0));
    mr.t1 = resolve(base_dir, field(c_t1));
    mr.mask_t0 = optional_path(c_m0);
    mr.mask_t1 = optional_path(c_m1);
    mr.labelmap_t0 = optional_path(c_l0);
    mr.labelmap_t1 = optional_path(c_l1);
    m.rows.push_back(std::move(mr));
  }
  if (m.rows.empty()) throw Error("manifest: no subjects");
  return m;
}

SubjectManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("manifest: cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return parse_manifest(ss.str(), path.parent_path());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string manifest_csv(const SubjectManifest& m) {
  bool masks = false, labels = false;
  for (const auto& r : m.rows) {
    masks = masks || r.mask_t0 || r.mask_t1;
    labels = labels || r.labelmap_t0 || r.labelmap_t1;
  }
  auto rel = [&](const std::filesystem::path& p) {
    if (m.base_dir.empty()) return p.string();
    return p.lexically_relative(m.base_dir).string();
  };
  auto opt = [&](const std::optional<std::filesystem::path>& p) {
    return p ? csv_escape(rel(*p)) : std::string();
  };
  std::string out = "subject_id,t0,t1";
  if (masks || labels) out += ",mask_t0,mask_t1";
  if (labels) out += ",labelmap_t0,labelmap_t1";
  out += '\n';
  for (const auto& r : m.rows) {
    out += csv_escape(r.subject_id) + ',' + csv_escape(rel(r.t0)) + ',' + csv_escape(rel(r.t1));
    if (masks || labels) out += ',' + opt(r.mask_t0) + ',' + opt(r.mask_t1);
    if (labels) out += ',' + opt(r.labelmap_t0) + ',' + opt(r.labelmap_t1);
    out += '\n';
  }
  return out;
}

std::optional<std::filesystem::path> first_missing_file(const ManifestRow& row) {
  std::error_code ec;
  for (const auto& p : {std::optional(row.t0), std::optional(row.t1), row.mask_t0, row.mask_t1,
                        row.labelmap_t0, row.labelmap_t1}) {
    if (p && !std::filesystem::is_regular_file(*p, ec)) return *p;
  }
  return std::nullopt;
}

}  // namespace atrophy
