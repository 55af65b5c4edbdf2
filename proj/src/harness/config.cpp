#include "atrophy/harness/config.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>

#include "atrophy/error.hpp"
#include "atrophy/util/csv.hpp"

namespace atrophy {

namespace {

double to_double(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) {
    throw Error("config: " + std::string(key) + ": expected a number, got '" + s + "'");
  }
  return d;
}

long long to_int(std::string_view key, std::string_view v) {
  const double d = to_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 9.0e15) {
    throw Error("config: " + std::string(key) + ": expected an integer, got '" + std::string(v) + "'");
  }
  return static_cast<long long>(d);
}

bool to_bool(std::string_view key, std::string_view v) {
  std::string s = trim(v);
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "off" || s == "no") return false;
  throw Error("config: " + std::string(key) + ": expected a boolean, got '" + std::string(v) + "'");
}

using Setter = std::function<void(PipelineConfig&, std::string_view, std::string_view)>;

Setter dbl(double PipelineConfig::*m) {
  return [m](PipelineConfig& c, std::string_view k, std::string_view v) { c.*m = to_double(k, v); };
}

template <typename Get>
Setter dbl_at(Get get) {
  return [get](PipelineConfig& c, std::string_view k, std::string_view v) { get(c) = to_double(k, v); };
}

template <typename Get>
Setter int_at(Get get) {
  return [get](PipelineConfig& c, std::string_view k, std::string_view v) {
    get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(to_int(k, v));
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> m = [] {
    std::map<std::string, Setter, std::less<>> t;
    t["variant"] = [](PipelineConfig& c, std::string_view, std::string_view v) {
      c.variant = parse_variant(trim(v));
    };
    t["extract.frac"] = dbl(&PipelineConfig::extract_frac);
    t["skull.max_distance_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.skull.max_distance_mm; });
    t["skull.step_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.skull.step_mm; });
    t["skull.normal_sigma_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.skull.normal_sigma_mm; });
    t["skull.rise_ratio"] = dbl_at([](PipelineConfig& c) -> double& { return c.skull.rise_ratio; });
    t["skull.floor_fraction"] = dbl_at([](PipelineConfig& c) -> double& { return c.skull.floor_fraction; });
    t["skull.min_points"] = int_at([](PipelineConfig& c) -> std::size_t& { return c.skull.min_points; });
    t["register.brain_weight"] = dbl_at([](PipelineConfig& c) -> double& { return c.reg.brain_weight; });
    t["register.skull_weight"] = dbl_at([](PipelineConfig& c) -> double& { return c.reg.skull_weight; });
    t["register.skull_brain_clearance"] =
        int_at([](PipelineConfig& c) -> int& { return c.reg.skull_brain_clearance; });
    t["register.min_sigma_vox"] = dbl_at([](PipelineConfig& c) -> double& { return c.reg.min_sigma_vox; });
    t["register.pyramid"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      std::vector<int> levels;
      std::string s(v);
      for (char& ch : s) {
        if (ch == '[' || ch == ']') ch = ' ';
      }
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (trim(item).empty()) continue;
        const long long f = to_int(k, item);
        if (f < 1) throw Error("config: register.pyramid factors must be >= 1");
        levels.push_back(static_cast<int>(f));
      }
      if (levels.empty()) throw Error("config: register.pyramid is empty");
      c.reg.pyramid = levels;
    };
    for (std::size_t i = 0; i < 4; ++i) {
      t["register.step" + std::to_string(i)] =
          dbl_at([i](PipelineConfig& c) -> double& { return c.reg.initial_steps[i]; });
      t["register.tol" + std::to_string(i)] =
          dbl_at([i](PipelineConfig& c) -> double& { return c.reg.tolerances[i]; });
    }
    t["register.max_sweeps"] = int_at([](PipelineConfig& c) -> int& { return c.reg.max_sweeps; });
    t["register.golden_iterations"] =
        int_at([](PipelineConfig& c) -> int& { return c.reg.golden_iterations; });
    t["pbvc.half_length_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.edge.half_length_mm; });
    t["pbvc.step_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.edge.step_mm; });
    t["pbvc.search_limit_mm"] =
        dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.edge.search_limit_mm; });
    t["pbvc.shift_step_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.edge.shift_step_mm; });
    t["pbvc.quality_floor"] = dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.edge.quality_floor; });
    t["pbvc.refine_iterations"] =
        int_at([](PipelineConfig& c) -> int& { return c.pbvc.edge.refine_iterations; });
    t["pbvc.interpolation"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      const std::string s = trim(v);
      if (s == "cubic") {
        c.pbvc.edge.interpolation = ProfileInterpolation::CubicBSpline;
      } else if (s == "linear") {
        c.pbvc.edge.interpolation = ProfileInterpolation::Trilinear;
      } else {
        throw Error("config: " + std::string(k) + ": expected cubic or linear, got '" + s + "'");
      }
    };
    t["pbvc.normal_sigma_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.normal_sigma_mm; });
    t["pbvc.profile_sigma_mm"] = dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.profile_sigma_mm; });
    t["pbvc.min_accept_fraction"] =
        dbl_at([](PipelineConfig& c) -> double& { return c.pbvc.min_accept_fraction; });
    t["calibrate"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      c.calibrate = to_bool(k, v);
    };
    t["s_cal"] = dbl(&PipelineConfig::s_cal);
    t["seed"] = [](PipelineConfig& c, std::string_view k, std::string_view v) {
      const std::string s = trim(v);
      std::uint64_t x = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
      if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
        throw Error("config: " + std::string(k) + ": expected an unsigned integer, got '" + s + "'");
      }
      c.seed = x;
    };
    return t;
  }();
  return m;
}

}  // namespace

void apply_config_setting(PipelineConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw Error("config: unknown key '" + std::string(key) + "'");
  it->second(cfg, key, value);
}

PipelineConfig parse_config_text(std::string_view text, PipelineConfig base) {
  // INI files may use ';' comment lines; the TOML reader only knows '#'.
  std::string src;
  std::istringstream lines{std::string(text)};
  for (std::string line; std::getline(lines, line);) {
    const std::string t = trim(line);
    if (!t.empty() && t[0] == ';') continue;
    src += line;
    src += '\n';
  }
  std::istringstream in{src};
  CLI::ConfigTOML reader;
  std::vector<CLI::ConfigItem> items;
  try {
    items = reader.from_config(in);
  } catch (const CLI::Error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  for (const auto& item : items) {
    // Section enter/leave markers.
    if (item.name == "++" || item.name == "--") continue;
    std::string key;
    for (const auto& p : item.parents) key += p + ".";
    key += item.name;
    std::string value;
    for (std::size_t i = 0; i < item.inputs.size(); ++i) {
      if (i) value += ',';
      value += item.inputs[i];
    }
    apply_config_setting(base, key, value);
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream f(path);
  if (!f) throw Error("config: cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

}  // namespace atrophy
