#include "tcl/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

namespace tcl {

namespace {

const std::string kNullName = "<null>";

bool is_auto_delimiter(char c) { return c == ' ' || c == '\t' || c == ',' || c == '\r'; }

std::vector<std::string_view> split_fields(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  if (delimiter == 0) {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_auto_delimiter(line[i])) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !is_auto_delimiter(line[j])) ++j;
      fields.push_back(line.substr(i, j - i));
      i = j;
    }
    return fields;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    std::string_view field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.remove_suffix(1);
    while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
    fields.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::shared_ptr<const std::vector<NodeId>> distinct_sorted(const std::vector<Interaction>& events,
                                                           bool sources) {
  std::set<NodeId> ids;
  for (const auto& e : events) ids.insert(sources ? e.source : e.target);
  return std::make_shared<const std::vector<NodeId>>(ids.begin(), ids.end());
}

}  // namespace

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary(bool bipartite) : bipartite_(bipartite), names_{kNullName} {}

std::string Vocabulary::key(std::string_view name, Role role) const {
  if (!bipartite_) return std::string(name);
  std::string k = role == Role::kSource ? "s:" : "t:";
  k.append(name);
  return k;
}

NodeId Vocabulary::intern(std::string_view name, Role role) {
  auto k = key(name, role);
  if (auto it = index_.find(k); it != index_.end()) return it->second;
  const auto id = static_cast<NodeId>(names_.size());
  names_.emplace_back(name);
  index_.emplace(std::move(k), id);
  return id;
}

std::optional<NodeId> Vocabulary::find(std::string_view name, Role role) const {
  if (auto it = index_.find(key(name, role)); it != index_.end()) return it->second;
  return std::nullopt;
}

const std::string& Vocabulary::name(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw std::out_of_range("node id " + std::to_string(id) + " outside vocabulary");
  }
  return names_[static_cast<std::size_t>(id)];
}

std::vector<std::string> Vocabulary::names() const {
  return {names_.begin() + 1, names_.end()};
}

// ---------------------------------------------------------------------------
// InteractionLog

InteractionLog::InteractionLog(std::vector<Interaction> events, std::shared_ptr<const Vocabulary> vocab,
                               std::shared_ptr<const std::vector<NodeId>> sources,
                               std::shared_ptr<const std::vector<NodeId>> targets)
    : events_(std::move(events)),
      vocab_(std::move(vocab)),
      sources_(std::move(sources)),
      targets_(std::move(targets)) {}

double InteractionLog::duration() const {
  if (events_.empty()) return 0.0;
  auto [lo, hi] = std::minmax_element(events_.begin(), events_.end(),
                                      [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
  return hi->timestamp - lo->timestamp;
}

InteractionLog InteractionLog::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > events_.size()) throw std::out_of_range("InteractionLog::slice range");
  return InteractionLog({events_.begin() + static_cast<std::ptrdiff_t>(begin),
                         events_.begin() + static_cast<std::ptrdiff_t>(end)},
                        vocab_, sources_, targets_);
}

InteractionLog InteractionLog::concat(const InteractionLog& other) const {
  if (other.vocab_ != vocab_) throw std::invalid_argument("InteractionLog::concat: vocabularies differ");
  std::vector<Interaction> merged(events_);
  merged.insert(merged.end(), other.events_.begin(), other.events_.end());
  return InteractionLog(std::move(merged), vocab_, sources_, targets_);
}

// ---------------------------------------------------------------------------
// LogBuilder

LogBuilder::LogBuilder(bool bipartite) : vocab_(std::make_shared<Vocabulary>(bipartite)) {}

void LogBuilder::add(std::string_view source, std::string_view target, double timestamp) {
  if (source.empty() || target.empty()) throw std::invalid_argument("empty node identifier");
  if (!std::isfinite(timestamp) || timestamp < 0.0) {
    throw std::invalid_argument("timestamp must be finite and non-negative");
  }
  const NodeId s = vocab_->intern(source, Vocabulary::Role::kSource);
  const NodeId t = vocab_->intern(target, Vocabulary::Role::kTarget);
  events_.push_back({s, t, timestamp});
}

InteractionLog LogBuilder::build() && {
  std::stable_sort(events_.begin(), events_.end(),
                   [](const Interaction& a, const Interaction& b) { return a.timestamp < b.timestamp; });
  auto sources = distinct_sorted(events_, true);
  auto targets = distinct_sorted(events_, false);
  return InteractionLog(std::move(events_), std::move(vocab_), std::move(sources), std::move(targets));
}

// ---------------------------------------------------------------------------
// Loading

InteractionLog parse_interactions(std::string_view text, const ColumnSpec& format) {
  LogBuilder builder(format.bipartite);
  const std::size_t needed = std::max({format.source, format.target, format.timestamp}) + 1;
  std::size_t line_no = 0;
  bool header_pending = format.skip_header;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string_view::npos) {
      if (nl == text.size()) break;
      continue;
    }
    if (line[first] == '#' || line[first] == '%') continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }

    const auto fields = split_fields(line, format.delimiter);
    if (fields.size() < needed) {
      throw ParseError(line_no, "expected at least " + std::to_string(needed) + " columns, found " +
                                    std::to_string(fields.size()));
    }
    const std::string_view ts_text = fields[format.timestamp];
    double ts = 0.0;
    auto [ptr, ec] = std::from_chars(ts_text.data(), ts_text.data() + ts_text.size(), ts);
    if (ec != std::errc() || ptr != ts_text.data() + ts_text.size()) {
      throw ParseError(line_no, "non-numeric timestamp '" + std::string(ts_text) + "'");
    }
    if (!std::isfinite(ts) || ts < 0.0) {
      throw ParseError(line_no, "timestamp must be finite and non-negative");
    }
    if (fields[format.source].empty() || fields[format.target].empty()) {
      throw ParseError(line_no, "empty node identifier");
    }
    builder.add(fields[format.source], fields[format.target], ts);
    if (nl == text.size()) break;
  }
  if (builder.size() == 0) throw std::runtime_error("no interactions found");
  return std::move(builder).build();
}

InteractionLog load_interactions(const std::filesystem::path& path, const ColumnSpec& format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open interaction file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  if (text.empty()) throw std::runtime_error("interaction file " + path.string() + " is empty");
  try {
    return parse_interactions(text, format);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.detail(), path.string());
  }
}

// ---------------------------------------------------------------------------
// Splits and statistics

SplitSpec SplitSpec::parse(std::string_view text) {
  std::vector<double> parts;
  for (auto field : split_fields(text, '/')) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw std::invalid_argument("bad split specification '" + std::string(text) + "'");
    }
    parts.push_back(v);
  }
  if (parts.size() != 3) throw std::invalid_argument("split needs three parts, e.g. 60/20/20");
  const double total = parts[0] + parts[1] + parts[2];
  const double scale = total > 1.5 ? 100.0 : 1.0;
  return {parts[0] / scale, parts[1] / scale, parts[2] / scale};
}

Splits chronological_split(const InteractionLog& log, const SplitSpec& spec) {
  if (log.empty()) throw std::invalid_argument("cannot split an empty log");
  for (double f : {spec.train_frac, spec.val_frac, spec.test_frac}) {
    if (!(f > 0.0 && f < 1.0)) throw std::invalid_argument("split fractions must lie in (0, 1)");
  }
  if (std::abs(spec.train_frac + spec.val_frac + spec.test_frac - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must sum to 1");
  }
  const auto n = static_cast<double>(log.size());
  // The small slack keeps products such as 10 * 0.7 from flooring to 6.
  const auto n_train = static_cast<std::size_t>(std::floor(n * spec.train_frac + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(n * spec.val_frac + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= log.size()) {
    throw std::invalid_argument("split of " + std::to_string(log.size()) + " events leaves an empty partition");
  }
  return {log.slice(0, n_train), log.slice(n_train, n_train + n_val), log.slice(n_train + n_val, log.size())};
}

DatasetStats dataset_stats(const InteractionLog& train, const InteractionLog& test, const InteractionLog& full,
                           double time_units_per_day) {
  if (test.empty()) throw std::invalid_argument("dataset_stats: empty test log");
  if (time_units_per_day <= 0.0) throw std::invalid_argument("dataset_stats: time_units_per_day must be positive");

  std::set<std::pair<NodeId, NodeId>> train_pairs;
  for (const auto& e : train.events()) train_pairs.emplace(e.source, e.target);
  std::size_t repeated = 0;
  for (const auto& e : test.events()) repeated += train_pairs.count({e.source, e.target});

  std::set<NodeId> sources;
  std::set<NodeId> targets;
  for (const auto& e : full.events()) {
    sources.insert(e.source);
    targets.insert(e.target);
  }
  DatasetStats stats;
  stats.n_sources = sources.size();
  stats.n_targets = targets.size();
  stats.n_interactions = full.size();
  stats.repetition_density = static_cast<double>(repeated) / static_cast<double>(test.size());
  stats.duration_days = full.duration() / time_units_per_day;
  return stats;
}

}  // namespace tcl
