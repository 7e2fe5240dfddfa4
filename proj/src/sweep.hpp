#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "classing.hpp"
#include "gis.hpp"

namespace cfme {

struct SweepRow {
  int classes = 0;
  double ops_per_event = 0.0;
};

struct SweepResult {
  int best = 0;
  std::vector<SweepRow> table;
};

// Builds the one-level hierarchy tried for a candidate class count.
using HierarchyFactory = std::function<ClassHierarchy(int)>;

// Runs one GIS iteration of the two-level factored problem per candidate count
// and picks the one with the fewest candidate evaluations per event; ties go
// to the smaller count.
SweepResult sweep_class_count(std::span<const Event> events, const Vocabulary& vocab,
                              std::span<const int> candidates,
                              std::span<const std::int32_t> indicator_classes,
                              std::int64_t min_count, const HierarchyFactory& make_hierarchy,
                              GisOptions options = {});

}  // namespace cfme
