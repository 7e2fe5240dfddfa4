#include "sweep.hpp"

#include "error.hpp"
#include "factored.hpp"

namespace cfme {

SweepResult sweep_class_count(std::span<const Event> events, const Vocabulary& vocab,
                              std::span<const int> candidates,
                              std::span<const std::int32_t> indicator_classes,
                              std::int64_t min_count, const HierarchyFactory& make_hierarchy,
                              GisOptions options) {
  if (candidates.empty()) fail(ErrorCode::kInvalidArgument, "no candidate class counts");
  options.iterations = 1;
  SweepResult result;
  for (int c : candidates) {
    auto problem = prepare_factored(events, vocab, make_hierarchy(c), indicator_classes,
                                    min_count);
    auto log = train_factored(problem, options);
    result.table.push_back(SweepRow{c, log.ops_per_event()});
  }
  const SweepRow* best = &result.table.front();
  for (const auto& row : result.table) {
    if (row.ops_per_event < best->ops_per_event ||
        (row.ops_per_event == best->ops_per_event && row.classes < best->classes)) {
      best = &row;
    }
  }
  result.best = best->classes;
  return result;
}

}  // namespace cfme
