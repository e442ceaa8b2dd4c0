#include <algorithm>
#include <map>
#include <set>

#include "nested_metaseg/error.hpp"
#include "nested_metaseg/metrics.hpp"

namespace nested_metaseg {
namespace {

std::vector<std::string> dispersion_group(std::string_view prefix) {
  const std::string p(prefix);
  return {p, p + "_bd", p + "_in", p + "_rel", p + "_rel_in"};
}

std::vector<std::string> class_probabilities(int classes) {
  std::vector<std::string> out;
  for (int y = 0; y < classes; ++y) out.push_back("P_" + std::to_string(y));
  return out;
}

std::vector<std::string> sizes() { return {"S", "S_in", "S_bd", "S_rel", "S_rel_in"}; }

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
  std::vector<std::string> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::map<std::string, std::vector<std::string>, std::less<>> groups(int classes) {
  std::map<std::string, std::vector<std::string>, std::less<>> g;
  g["all"] = feature_catalog(classes);
  std::vector<std::string> no_var;
  for (const auto& f : g["all"]) {
    if (f.rfind("v_", 0) != 0) no_var.push_back(f);
  }
  g["all-no-variance"] = no_var;
  g["entropy-baseline"] = {"mu_E"};
  for (const char* u : {"E", "M", "V"}) {
    const std::string mu = std::string("mu_") + u;
    const std::string v = std::string("v_") + u;
    g[mu] = dispersion_group(mu);
    g[mu + "+" + v] = concat({dispersion_group(mu), dispersion_group(v)});
  }
  g["K"] = dispersion_group("K");
  g["P"] = class_probabilities(classes);
  g["sizes"] = sizes();
  g["sizes+center"] = concat({sizes(), {"center_row", "center_col"}});
  // Segment-wise metrics of the earlier single-crop method: mean entropy and
  // margin families, sizes, class probabilities.
  g["metaseg-2018"] = concat({dispersion_group("mu_E"), dispersion_group("mu_M"), sizes(),
                              class_probabilities(classes)});
  return g;
}

}  // namespace

std::vector<std::string> feature_set_names() {
  std::vector<std::string> out;
  for (const auto& [name, _] : groups(2)) out.push_back(name);
  return out;
}

std::vector<std::string> resolve_feature_set(std::string_view spec, int classes) {
  const auto catalog = feature_catalog(classes);
  const auto named = groups(classes);
  std::set<std::string, std::less<>> chosen;
  std::size_t start = 0;
  while (start <= spec.size()) {
    std::size_t comma = spec.find(',', start);
    if (comma == std::string_view::npos) comma = spec.size();
    std::string_view token = spec.substr(start, comma - start);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (!token.empty()) {
      if (const auto it = named.find(token); it != named.end()) {
        chosen.insert(it->second.begin(), it->second.end());
      } else if (std::find(catalog.begin(), catalog.end(), token) != catalog.end()) {
        chosen.emplace(token);
      } else {
        throw ValidationError("unknown feature or feature set '" + std::string(token) + "'");
      }
    }
    start = comma + 1;
  }
  if (chosen.empty()) throw ValidationError("empty feature set '" + std::string(spec) + "'");
  std::vector<std::string> out;
  for (const auto& f : catalog) {
    if (chosen.count(f) != 0) out.push_back(f);
  }
  return out;
}

}  // namespace nested_metaseg
