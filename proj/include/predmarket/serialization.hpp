#pragma once

// JSON documents for markets, forests and the Gaussian benchmark spec.
// Every document carries a "format" tag and an integer "version".

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "predmarket/betting.hpp"
#include "predmarket/data.hpp"
#include "predmarket/error.hpp"
#include "predmarket/forest.hpp"
#include "predmarket/market.hpp"

namespace predmarket {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

namespace detail {

inline void check_format(const Json& j, const char* format) {
  if (!j.is_object() || j.value("format", std::string()) != format)
    throw SpecError(std::string("expected a ") + format + " document");
  if (j.value("version", 0) != kFormatVersion)
    throw SpecError(std::string("unsupported ") + format + " version");
}

template <class F>
auto json_guard(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw SpecError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace detail

/// {"format":"predmarket.market","version":1,"class_count":K,
///  "references":[{"x":[...],"y":label},...],
///  "participants":[{"budget":b,"bettor":"<descriptor>"},...]}
inline Json market_to_json(const Market& market) {
  ReferenceTable refs;
  Json parts = Json::array();
  for (const auto& p : market.participants())
    parts.push_back({{"budget", p.budget}, {"bettor", to_descriptor(p.bettor, &refs)}});
  Json jrefs = Json::array();
  for (std::size_t i = 0; i < refs.size(); ++i)
    jrefs.push_back({{"x", refs.at(i)->x}, {"y", refs.at(i)->y.value()}});
  Json j;
  j["format"] = "predmarket.market";
  j["version"] = kFormatVersion;
  j["class_count"] = market.class_count();
  j["references"] = std::move(jrefs);
  j["participants"] = std::move(parts);
  return j;
}

inline Market market_from_json(const Json& j) {
  return detail::json_guard([&] {
    detail::check_format(j, "predmarket.market");
    ReferenceTable refs;
    for (const auto& r : j.at("references"))
      refs.add(std::make_shared<const KernelReference>(
          KernelReference{r.at("x").get<Instance>(), Label(r.at("y").get<int>())}));
    Market market(j.at("class_count").get<std::size_t>());
    for (const auto& p : j.at("participants"))
      market.add(parse_descriptor(p.at("bettor").get<std::string>(), &refs), p.at("budget").get<double>());
    return market;
  });
}

/// Trees as preorder node lists: {"split":[feature,threshold]} for internal
/// nodes and {"counts":[...]} for leaves.
inline Json forest_to_json(const Forest& forest) {
  Json trees = Json::array();
  for (const auto& tree : forest) {
    Json nodes = Json::array();
    for (const auto& n : tree.nodes()) {
      if (n.is_leaf())
        nodes.push_back({{"counts", n.counts}});
      else
        nodes.push_back({{"split", {n.feature, n.threshold}}});
    }
    trees.push_back(std::move(nodes));
  }
  Json j;
  j["format"] = "predmarket.forest";
  j["version"] = kFormatVersion;
  j["class_count"] = forest.empty() ? 0 : forest.front().class_count();
  j["feature_count"] = forest.empty() ? 0 : forest.front().feature_count();
  j["trees"] = std::move(trees);
  return j;
}

inline Forest forest_from_json(const Json& j) {
  return detail::json_guard([&] {
    detail::check_format(j, "predmarket.forest");
    const auto K = j.at("class_count").get<std::size_t>();
    const auto F = j.at("feature_count").get<std::size_t>();
    Forest forest;
    for (const auto& jt : j.at("trees")) {
      std::vector<TreeNode> nodes(jt.size());
      // Rebuild child links from preorder: a pending internal node takes the
      // next subtree as its left child, then the one after as its right.
      std::vector<std::pair<std::size_t, int>> open;  // node, children seen
      for (std::size_t i = 0; i < jt.size(); ++i) {
        const auto& jn = jt[i];
        if (!open.empty()) {
          auto& [parent, seen] = open.back();
          (seen == 0 ? nodes[parent].left : nodes[parent].right) = i;
          if (++seen == 2) open.pop_back();
        } else if (i != 0) {
          throw SpecError("tree node list has trailing nodes");
        }
        if (jn.contains("split")) {
          nodes[i].feature = jn.at("split").at(0).get<std::size_t>();
          nodes[i].threshold = jn.at("split").at(1).get<double>();
          open.emplace_back(i, 0);
        } else {
          nodes[i].counts = jn.at("counts").get<std::vector<double>>();
        }
      }
      if (!open.empty()) throw SpecError("tree node list ends inside a subtree");
      forest.emplace_back(std::move(nodes), K, F);
    }
    return forest;
  });
}

inline Json gaussian_spec_to_json(const GaussianPairSpec& spec) {
  Json j;
  j["format"] = "predmarket.gaussian_pair";
  j["version"] = kFormatVersion;
  j["dim"] = spec.dim;
  j["mu0"] = std::vector<double>(spec.dim, 0.0);
  j["mu1"] = spec.mu1;
  j["sigma"] = spec.sigma;
  j["priors"] = {0.5, 0.5};
  return j;
}

inline GaussianPairSpec gaussian_spec_from_json(const Json& j) {
  return detail::json_guard([&] {
    detail::check_format(j, "predmarket.gaussian_pair");
    GaussianPairSpec spec;
    spec.dim = j.at("dim").get<std::size_t>();
    spec.mu1 = j.at("mu1").get<std::vector<double>>();
    spec.sigma = j.at("sigma").get<double>();
    if (spec.mu1.size() != spec.dim) throw SpecError("gaussian spec: mu1 has the wrong dimension");
    return spec;
  });
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw SpecError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace predmarket
