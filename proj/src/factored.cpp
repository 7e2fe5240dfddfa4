#include "factored.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace cfme {

namespace {

constexpr std::array<std::string_view, 4> kMethodNames = {"gis", "gis-cache", "factored2",
                                                          "factored3"};

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot read " + path.string());
  return in;
}

std::size_t class_level_count(const ClassHierarchy* hierarchy) {
  return hierarchy ? hierarchy->levels() : 0;
}

}  // namespace

std::string_view method_name(Method method) {
  return kMethodNames[static_cast<std::size_t>(method)];
}

std::optional<Method> method_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kMethodNames.size(); ++i) {
    if (kMethodNames[i] == name) return static_cast<Method>(i);
  }
  return std::nullopt;
}

int class_levels(Method method) {
  switch (method) {
    case Method::kFactored2:
      return 1;
    case Method::kFactored3:
      return 2;
    default:
      return 0;
  }
}

bool uses_unigram_cache(Method method) { return method == Method::kGisCache; }

CandidateSpace level_space(const Vocabulary& vocab, const ClassHierarchy* hierarchy,
                           std::size_t level) {
  const std::size_t class_level_n = class_level_count(hierarchy);
  if (level > class_level_n) fail(ErrorCode::kInvalidArgument, "level out of range");
  if (hierarchy && hierarchy->vocab_size() != vocab.size()) {
    fail(ErrorCode::kInvalidArgument, "class hierarchy does not cover the vocabulary");
  }
  if (level == class_level_n) {
    std::vector<std::int32_t> group_of(vocab.size(), -1);
    for (std::size_t w = 0; w < vocab.size(); ++w) {
      if (!vocab.is_output(static_cast<WordId>(w))) continue;
      group_of[w] = hierarchy ? hierarchy->class_of(static_cast<WordId>(w), level - 1) : 0;
    }
    std::string desc = hierarchy ? "words-in-class " + std::to_string(level - 1) : "words";
    return CandidateSpace(std::move(desc), std::move(group_of));
  }
  std::vector<std::int32_t> group_of(hierarchy->class_count(level), 0);
  if (level > 0) {
    for (std::size_t c = 0; c < group_of.size(); ++c) {
      group_of[c] = hierarchy->parent(level, static_cast<ClassId>(c));
    }
  }
  return CandidateSpace("classes " + std::to_string(level), std::move(group_of));
}

std::vector<std::vector<Event>> factor_events(std::span<const Event> events,
                                              const Vocabulary& vocab,
                                              const ClassHierarchy* hierarchy) {
  const std::size_t class_level_n = class_level_count(hierarchy);
  if (hierarchy && hierarchy->vocab_size() != vocab.size()) {
    fail(ErrorCode::kInvalidArgument, "class hierarchy does not cover the vocabulary");
  }
  std::vector<std::vector<Event>> out(class_level_n + 1);
  for (auto& level : out) level.reserve(events.size());
  for (const auto& e : events) {
    if (!vocab.is_output(e.target)) {
      fail(ErrorCode::kInvalidArgument,
           "event target " + std::to_string(e.target) + " is not a predicted word");
    }
    for (std::size_t k = 0; k < class_level_n; ++k) {
      out[k].push_back(Event{e.history, hierarchy->class_of(e.target, k), e.count});
    }
    out[class_level_n].push_back(e);
  }
  for (auto& level : out) level = merge_events(std::move(level));
  return out;
}

FactoredModel::FactoredModel(std::optional<ClassHierarchy> hierarchy,
                             std::vector<MaxEntModel> levels, std::size_t vocab_size)
    : hierarchy_(std::move(hierarchy)), levels_(std::move(levels)), vocab_size_(vocab_size) {
  if (levels_.size() != class_level_count(this->hierarchy()) + 1) {
    fail(ErrorCode::kInvalidArgument, "factored model needs one sub-model per level");
  }
}

double FactoredModel::probability(const History& h, WordId word) const {
  if (word < Vocabulary::kUnknown || static_cast<std::size_t>(word) >= vocab_size_) return 0.0;
  const std::size_t class_level_n = levels_.size() - 1;
  double p = 1.0;
  for (std::size_t k = 0; k < class_level_n; ++k) {
    p *= cfme::probability(levels_[k], h, hierarchy_->class_of(word, k));
  }
  return p * cfme::probability(levels_.back(), h, word);
}

std::vector<double> FactoredModel::distribution(const History& h) const {
  // Walk the levels top-down, spreading each group's mass over its members.
  std::vector<double> mass{1.0};  // mass of each group at the current level
  for (std::size_t k = 0; k < levels_.size(); ++k) {
    const auto& model = levels_[k];
    const auto& space = model.space();
    std::vector<double> next(space.target_count(), 0.0);
    for (std::size_t g = 0; g < space.group_count(); ++g) {
      if (mass[g] == 0.0) continue;
      auto dist = group_distribution(model, h, static_cast<std::int32_t>(g));
      const auto& cands = space.group(static_cast<std::int32_t>(g));
      for (std::size_t i = 0; i < cands.size(); ++i) {
        next[static_cast<std::size_t>(cands[i])] = mass[g] * dist[i];
      }
    }
    mass = std::move(next);
  }
  return mass;
}

FactoredProblem prepare_factored(std::span<const Event> events, const Vocabulary& vocab,
                                 std::optional<ClassHierarchy> hierarchy,
                                 std::span<const std::int32_t> indicator_classes,
                                 std::int64_t min_count) {
  if (events.empty()) fail(ErrorCode::kInvalidArgument, "no training events");
  if (indicator_classes.size() != vocab.size()) {
    fail(ErrorCode::kInvalidArgument, "indicator map does not cover the vocabulary");
  }
  const ClassHierarchy* hp = hierarchy ? &*hierarchy : nullptr;
  FactoredProblem problem;
  problem.level_events = factor_events(events, vocab, hp);
  std::vector<MaxEntModel> levels;
  for (std::size_t k = 0; k < problem.level_events.size(); ++k) {
    const auto& level_events = problem.level_events[k];
    auto features = instantiate(level_events, indicator_classes, min_count);
    levels.push_back(make_model(std::move(features), level_space(vocab, hp, k), level_events));
  }
  problem.model = FactoredModel(std::move(hierarchy), std::move(levels), vocab.size());
  return problem;
}

double FactoredTrainLog::ops_per_event() const {
  double total = 0.0;
  for (const auto& log : levels) {
    if (log.iterations.empty() || log.event_count == 0) continue;
    total += static_cast<double>(log.iterations.front().op_count) /
             static_cast<double>(log.event_count);
  }
  return total;
}

double FactoredTrainLog::seconds_per_iteration() const {
  double total = 0.0;
  for (const auto& log : levels) {
    if (log.iterations.empty()) continue;
    double s = 0.0;
    for (const auto& it : log.iterations) s += it.seconds;
    total += s / static_cast<double>(log.iterations.size());
  }
  return total;
}

bool FactoredTrainLog::converged() const {
  for (const auto& log : levels) {
    if (!log.converged) return false;
  }
  return true;
}

FactoredTrainLog train_factored(FactoredProblem& problem, const GisOptions& options) {
  FactoredTrainLog log;
  for (std::size_t k = 0; k < problem.model.level_count(); ++k) {
    log.levels.push_back(train(problem.model.level(k), problem.level_events[k], options));
  }
  return log;
}

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create " + dir.string() + ": " + ec.message());
  const auto& model = bundle.model;
  if (model.vocab_size() != bundle.vocab.size()) {
    fail(ErrorCode::kInvalidArgument, "model and vocabulary sizes differ");
  }
  bundle.vocab.save(dir / "vocab.txt");
  bundle.indicator.save(dir / "indicator.map", bundle.vocab);
  if (model.hierarchy()) model.hierarchy()->save(dir / "hierarchy.map", bundle.vocab);
  for (std::size_t k = 0; k < model.level_count(); ++k) {
    auto out = open_output(dir / ("level" + std::to_string(k) + ".model"));
    save_model(out, model.level(k));
    if (!out) fail(ErrorCode::kIo, "write failed in " + dir.string());
  }
  // The manifest goes last so a complete one marks a complete directory.
  auto out = open_output(dir / "manifest.txt");
  out << "method " << method_name(bundle.method) << '\n';
  out << "level_count " << model.level_count() << '\n';
  for (std::size_t k = 0; k < model.level_count(); ++k) out << "level" << k << ".model\n";
  if (!out) fail(ErrorCode::kIo, "write failed in " + dir.string());
}

ModelBundle load_bundle(const std::filesystem::path& dir) {
  auto in = open_input(dir / "manifest.txt");
  auto bad = [&](const std::string& why) {
    fail(ErrorCode::kFormat, (dir / "manifest.txt").string() + ": " + why);
  };
  std::string key, value;
  if (!(in >> key >> value) || key != "method") bad("missing method");
  auto method = method_from_name(value);
  if (!method) bad("unknown method '" + value + "'");
  std::size_t level_count = 0;
  if (!(in >> key >> level_count) || key != "level_count") bad("missing level_count");
  if (level_count != static_cast<std::size_t>(class_levels(*method)) + 1) {
    bad("level count does not match method");
  }
  std::vector<std::string> files(level_count);
  for (auto& f : files) {
    if (!(in >> f)) bad("missing level file");
  }

  ModelBundle bundle;
  bundle.method = *method;
  bundle.vocab = Vocabulary::load(dir / "vocab.txt");
  bundle.indicator = ClassHierarchy::load(dir / "indicator.map", bundle.vocab);
  if (bundle.indicator.levels() != 1) bad("indicator map must have one level");
  std::optional<ClassHierarchy> hierarchy;
  if (level_count > 1) {
    hierarchy = ClassHierarchy::load(dir / "hierarchy.map", bundle.vocab);
    if (hierarchy->levels() != level_count - 1) bad("hierarchy depth does not match");
  }
  const ClassHierarchy* hp = hierarchy ? &*hierarchy : nullptr;
  std::vector<MaxEntModel> levels;
  for (std::size_t k = 0; k < level_count; ++k) {
    auto model_in = open_input(dir / files[k]);
    auto file = read_model_file(model_in);
    auto space = level_space(bundle.vocab, hp, k);
    if (file.candidate_space != space.descriptor()) {
      fail(ErrorCode::kFormat, files[k] + ": candidate space '" + file.candidate_space +
                                   "' does not match level " + std::to_string(k));
    }
    for (const auto& key : file.keys) {
      if (key.target < 0 || static_cast<std::size_t>(key.target) >= space.target_count()) {
        fail(ErrorCode::kFormat, files[k] + ": feature target out of range");
      }
    }
    levels.push_back(model_from_file(file, std::move(space), bundle.indicator.level_map(0)));
  }
  bundle.model = FactoredModel(std::move(hierarchy), std::move(levels), bundle.vocab.size());
  return bundle;
}

ClassHierarchy induce_indicator_map(std::span<const Event> events, const Vocabulary& vocab,
                                    int num_classes, std::uint64_t seed) {
  if (num_classes < 1) fail(ErrorCode::kInvalidArgument, "indicator classes must be >= 1");
  int n = std::min<int>(num_classes, static_cast<int>(vocab.output_count()));
  InductionOptions options;
  options.seed = seed;
  return induce_classes(events, vocab, n, options);
}

}  // namespace cfme
