#pragma once

// Two-stage compression of a long agent message history.
//
// Stage 1 caches a summarized form of every pending message (short messages
// and summaries that fail to shrink keep the original text). Stage 2 picks a
// rendering level per message group so the reconstructed context fits a
// token budget: groups outside the sliding window are dropped, the newest
// groups stay original, and the rest are degraded oldest-first one stage at
// a time (original -> compressed -> truncate -> drop). The first group may
// degrade but is never dropped.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agentga/errors.hpp"
#include "json.hpp"

namespace agentga::context {

enum class Role { System, Ai, Tool, Human };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::Ai: return "ai";
    case Role::Tool: return "tool";
    case Role::Human: return "human";
  }
  return "?";
}

inline Role role_from_string(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "ai") return Role::Ai;
  if (s == "tool") return Role::Tool;
  if (s == "human") return Role::Human;
  throw ConfigError("unknown message role '" + std::string(s) + "'");
}

enum class SelectionStatus { Original = 0, Compressed = 1, Truncate = 2, Drop = 3 };

inline std::string_view to_string(SelectionStatus s) {
  switch (s) {
    case SelectionStatus::Original: return "original";
    case SelectionStatus::Compressed: return "compressed";
    case SelectionStatus::Truncate: return "truncate";
    case SelectionStatus::Drop: return "drop";
  }
  return "?";
}

inline SelectionStatus selection_status_from_string(std::string_view s) {
  if (s == "original") return SelectionStatus::Original;
  if (s == "compressed") return SelectionStatus::Compressed;
  if (s == "truncate") return SelectionStatus::Truncate;
  if (s == "drop") return SelectionStatus::Drop;
  throw ConfigError("unknown selection status '" + std::string(s) + "'");
}

enum class CompressionStatus { Pending = 0, Compressed = 1 };

using ToolArgs = std::map<std::string, std::string>;

struct BudgetConfig {
  std::size_t trigger_tokens = 100'000;
  std::size_t target_tokens = 20'000;
  std::size_t recent_groups_protected = 5;
  std::size_t window_groups = 50;
  std::size_t min_compress_tokens = 50;
  std::size_t periodic_interval_steps = 100;
  std::size_t batch_size = 2;
  std::size_t truncate_tokens = 64;
};

inline void validate(const BudgetConfig& b) {
  if (b.target_tokens >= b.trigger_tokens) throw ConfigError("budget: target must be below trigger");
  if (b.recent_groups_protected > b.window_groups) throw ConfigError("budget: protected groups exceed window");
  if (b.window_groups < 1) throw ConfigError("budget: window must hold at least one group");
  if (b.batch_size < 1) throw ConfigError("budget: batch_size must be >= 1");
}

inline constexpr std::string_view kElisionMarker = " [...truncated]";

// ---------------------------------------------------------------------------
// Token counting

class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  /// Longest prefix of `text` holding at most `max_tokens` tokens.
  virtual std::string head(std::string_view text, std::size_t max_tokens) const = 0;
};

/// Approximate counter: each maximal run of word bytes (alphanumerics,
/// underscore, any non-ASCII byte) is one token, each other non-space byte is
/// one token, whitespace is free.
class WordPunctCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override {
    std::size_t n = 0;
    bool in_word = false;
    for (char ch : text) {
      auto c = static_cast<unsigned char>(ch);
      if (is_word(c)) {
        if (!in_word) ++n;
        in_word = true;
      } else {
        in_word = false;
        if (!std::isspace(c)) ++n;
      }
    }
    return n;
  }

  std::string head(std::string_view text, std::size_t max_tokens) const override {
    std::size_t n = 0;
    bool in_word = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
      auto c = static_cast<unsigned char>(text[i]);
      bool starts = is_word(c) ? !in_word : !std::isspace(c);
      in_word = is_word(c);
      if (starts) {
        if (n == max_tokens) return std::string(text.substr(0, i));
        ++n;
      }
    }
    return std::string(text);
  }

 private:
  static bool is_word(unsigned char c) { return std::isalnum(c) || c == '_' || c >= 0x80; }
};

inline const TokenCounter& default_counter() {
  static const WordPunctCounter counter;
  return counter;
}

inline std::size_t count_tokens(std::string_view text) { return default_counter().count(text); }

inline std::size_t count_message(const TokenCounter& counter, std::string_view text, const std::optional<ToolArgs>& args) {
  std::size_t n = counter.count(text);
  if (args) {
    for (const auto& [k, v] : *args) n += counter.count(k) + counter.count(v);
  }
  return n;
}

// ---------------------------------------------------------------------------
// History

struct Message {
  int id = 0;
  Role role = Role::Human;
  std::string text;
  std::optional<ToolArgs> tool_call_args;  // present on AI tool-call messages
  std::size_t token_count = 0;

  bool is_tool_call() const { return role == Role::Ai && tool_call_args.has_value(); }
};

inline Message make_message(int id, Role role, std::string text, std::optional<ToolArgs> args = std::nullopt,
                            const TokenCounter& counter = default_counter()) {
  Message m{id, role, std::move(text), std::move(args), 0};
  m.token_count = count_message(counter, m.text, m.tool_call_args);
  return m;
}

struct CompressedForm {
  std::string text;
  std::optional<ToolArgs> args;
  std::size_t token_count = 0;
};

struct MessageHistory {
  std::vector<Message> messages;
  std::vector<std::optional<CompressedForm>> cache;
  std::vector<CompressionStatus> compression;
  std::vector<std::string> diagnostics;

  void add(Message m) {
    messages.push_back(std::move(m));
    cache.emplace_back();
    compression.push_back(CompressionStatus::Pending);
  }
  std::size_t size() const { return messages.size(); }
};

struct MessageGroup {
  std::vector<std::size_t> members;  // positions in the history, contiguous
  std::size_t index = 0;
};

/// AI tool-call messages absorb the tool responses that follow them; every
/// other message is its own group. Orphan tool messages become singletons.
inline std::vector<MessageGroup> group_messages(const std::vector<Message>& history,
                                                std::vector<std::string>* diagnostics = nullptr) {
  std::vector<MessageGroup> groups;
  std::size_t i = 0;
  while (i < history.size()) {
    MessageGroup g;
    g.index = groups.size();
    g.members.push_back(i);
    if (history[i].is_tool_call()) {
      while (i + 1 < history.size() && history[i + 1].role == Role::Tool) g.members.push_back(++i);
    } else if (history[i].role == Role::Tool && diagnostics) {
      diagnostics->push_back("orphan tool message id " + std::to_string(history[i].id));
    }
    groups.push_back(std::move(g));
    ++i;
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Stage 1: pending-message compression

/// text -> shorter text. May throw to signal failure. Must be safe to call
/// from several threads at once.
using Summarizer = std::function<std::string(const std::string&)>;

struct CompressionReport {
  std::size_t processed = 0;
  std::size_t copied_short = 0;
  std::size_t kept_original = 0;  // summary was not shorter
  std::size_t summarized = 0;
  std::size_t failures = 0;
};

namespace detail {

struct Attempt {
  std::optional<CompressedForm> form;
  std::string failure;
  enum { Short, Original, Summarized } kind = Short;
};

inline std::string shorter_of(const Summarizer& summarize, const std::string& text, const TokenCounter& counter) {
  std::string s = summarize(text);
  return counter.count(s) < counter.count(text) ? s : text;
}

inline Attempt compress_one(const Message& m, const Summarizer& summarize, const BudgetConfig& budget,
                            const TokenCounter& counter) {
  Attempt a;
  if (m.token_count < budget.min_compress_tokens) {
    a.form = CompressedForm{m.text, m.tool_call_args, m.token_count};
    return a;
  }
  try {
    CompressedForm f;
    f.text = counter.count(m.text) >= budget.min_compress_tokens ? shorter_of(summarize, m.text, counter) : m.text;
    if (m.tool_call_args) {
      f.args = ToolArgs{};
      for (const auto& [k, v] : *m.tool_call_args)
        (*f.args)[k] = counter.count(v) >= budget.min_compress_tokens ? shorter_of(summarize, v, counter) : v;
    }
    f.token_count = count_message(counter, f.text, f.args);
    if (f.token_count >= m.token_count) {
      a.form = CompressedForm{m.text, m.tool_call_args, m.token_count};
      a.kind = Attempt::Original;
    } else {
      a.form = std::move(f);
      a.kind = Attempt::Summarized;
    }
  } catch (const std::exception& e) {
    a.failure = e.what();
  } catch (...) {
    a.failure = "unknown summarizer failure";
  }
  return a;
}

}  // namespace detail

/// Fills the compressed cache of every pending message, `batch_size`
/// summarizer calls at a time. `between_batches` is invoked after each batch
/// (rate-limit pacing hook).
inline CompressionReport compress_pending(MessageHistory& history, const Summarizer& summarize,
                                          const BudgetConfig& budget,
                                          const TokenCounter& counter = default_counter(),
                                          const std::function<void()>& between_batches = {}) {
  CompressionReport report;
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < history.size(); ++i)
    if (history.compression[i] == CompressionStatus::Pending) pending.push_back(i);

  const std::size_t batch = std::max<std::size_t>(1, budget.batch_size);
  for (std::size_t start = 0; start < pending.size(); start += batch) {
    const std::size_t end = std::min(pending.size(), start + batch);
    std::vector<std::future<detail::Attempt>> futures;
    for (std::size_t k = start; k < end; ++k) {
      const Message& m = history.messages[pending[k]];
      futures.push_back(std::async(std::launch::async, [&m, &summarize, &budget, &counter] {
        return detail::compress_one(m, summarize, budget, counter);
      }));
    }
    for (std::size_t k = start; k < end; ++k) {
      auto attempt = futures[k - start].get();
      const std::size_t pos = pending[k];
      ++report.processed;
      if (!attempt.form) {
        ++report.failures;
        history.diagnostics.push_back("summarizer failed on message id " + std::to_string(history.messages[pos].id) +
                                      ": " + attempt.failure);
        continue;
      }
      switch (attempt.kind) {
        case detail::Attempt::Short: ++report.copied_short; break;
        case detail::Attempt::Original: ++report.kept_original; break;
        case detail::Attempt::Summarized: ++report.summarized; break;
      }
      history.cache[pos] = std::move(attempt.form);
      history.compression[pos] = CompressionStatus::Compressed;
    }
    if (between_batches && end < pending.size()) between_batches();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Stage 2: selection and reconstruction

struct GroupCosts {
  std::size_t original = 0;
  std::optional<std::size_t> compressed;  // nullopt while any member is pending
  std::size_t truncate = 0;

  std::size_t at(SelectionStatus s) const {
    switch (s) {
      case SelectionStatus::Original: return original;
      case SelectionStatus::Compressed: return compressed.value_or(original);
      case SelectionStatus::Truncate: return truncate;
      case SelectionStatus::Drop: return 0;
    }
    return original;
  }
};

struct Selection {
  std::vector<SelectionStatus> statuses;  // one per group
  std::size_t total_tokens = 0;           // includes reserved tokens
  bool over_budget = false;
};

/// Picks a status per group. `reserved_tokens` is the fixed overhead (system
/// prompt) that counts against the target.
inline Selection select_statuses(const std::vector<GroupCosts>& costs, const BudgetConfig& budget,
                                 std::size_t reserved_tokens = 0) {
  const std::size_t n = costs.size();
  Selection sel;
  sel.statuses.assign(n, SelectionStatus::Original);
  if (n == 0) {
    sel.total_tokens = reserved_tokens;
    sel.over_budget = reserved_tokens > budget.target_tokens;
    return sel;
  }

  // The window keeps the newest `window_groups` groups, counting the
  // always-kept first group among them.
  if (n > budget.window_groups) {
    for (std::size_t g = 1; g <= n - budget.window_groups; ++g) sel.statuses[g] = SelectionStatus::Drop;
  }
  const std::size_t protected_from = n - std::min(n, budget.recent_groups_protected);

  std::size_t total = reserved_tokens;
  for (std::size_t g = 0; g < n; ++g) total += costs[g].at(sel.statuses[g]);

  constexpr SelectionStatus kStages[] = {SelectionStatus::Compressed, SelectionStatus::Truncate, SelectionStatus::Drop};
  for (SelectionStatus stage : kStages) {
    for (std::size_t g = 0; g < protected_from && total > budget.target_tokens; ++g) {
      const SelectionStatus cur = sel.statuses[g];
      if (cur >= stage) continue;
      if (stage == SelectionStatus::Drop && g == 0) continue;
      if (stage == SelectionStatus::Compressed && !costs[g].compressed) continue;
      const std::size_t now = costs[g].at(cur), next = costs[g].at(stage);
      if (next >= now) continue;
      sel.statuses[g] = stage;
      total = total - now + next;
    }
  }
  sel.total_tokens = total;
  sel.over_budget = total > budget.target_tokens;
  return sel;
}

struct RenderedMessage {
  int id = 0;
  Role role = Role::Human;
  std::string text;
  std::optional<ToolArgs> args;
  SelectionStatus status = SelectionStatus::Original;
};

namespace detail {
inline std::string truncate_text(const std::string& text, const BudgetConfig& budget, const TokenCounter& counter) {
  if (counter.count(text) <= budget.truncate_tokens) return text;
  return counter.head(text, budget.truncate_tokens) + std::string(kElisionMarker);
}
}  // namespace detail

inline std::optional<RenderedMessage> render_message(const MessageHistory& h, std::size_t pos, SelectionStatus status,
                                                     const BudgetConfig& budget, const TokenCounter& counter) {
  const Message& m = h.messages[pos];
  RenderedMessage r{m.id, m.role, m.text, m.tool_call_args, status};
  switch (status) {
    case SelectionStatus::Original: break;
    case SelectionStatus::Compressed:
      if (h.compression[pos] == CompressionStatus::Compressed && h.cache[pos]) {
        r.text = h.cache[pos]->text;
        r.args = h.cache[pos]->args;
      }
      break;
    case SelectionStatus::Truncate:
      r.text = detail::truncate_text(m.text, budget, counter);
      if (r.args) {
        for (auto& [k, v] : *r.args) v = detail::truncate_text(v, budget, counter);
      }
      break;
    case SelectionStatus::Drop: return std::nullopt;
  }
  return r;
}

inline std::size_t rendered_tokens(const RenderedMessage& r, const TokenCounter& counter) {
  return count_message(counter, r.text, r.args);
}

inline std::vector<GroupCosts> group_costs(const MessageHistory& h, const std::vector<MessageGroup>& groups,
                                           const BudgetConfig& budget, const TokenCounter& counter = default_counter()) {
  std::vector<GroupCosts> costs;
  costs.reserve(groups.size());
  for (const auto& g : groups) {
    GroupCosts c;
    bool all_cached = true;
    std::size_t compressed = 0;
    for (std::size_t pos : g.members) {
      c.original += rendered_tokens(*render_message(h, pos, SelectionStatus::Original, budget, counter), counter);
      c.truncate += rendered_tokens(*render_message(h, pos, SelectionStatus::Truncate, budget, counter), counter);
      if (h.compression[pos] == CompressionStatus::Compressed && h.cache[pos]) {
        compressed += rendered_tokens(*render_message(h, pos, SelectionStatus::Compressed, budget, counter), counter);
      } else {
        all_cached = false;
      }
    }
    if (all_cached) c.compressed = compressed;
    costs.push_back(c);
  }
  return costs;
}

/// Order-preserving render of the selected context; dropped groups vanish.
inline std::vector<RenderedMessage> reconstruct_context(const MessageHistory& h, const std::vector<MessageGroup>& groups,
                                                        const std::vector<SelectionStatus>& statuses,
                                                        const BudgetConfig& budget,
                                                        const TokenCounter& counter = default_counter()) {
  if (statuses.size() != groups.size()) throw ConfigError("reconstruct_context: one status per group required");
  std::vector<RenderedMessage> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t pos : groups[g].members) {
      if (auto r = render_message(h, pos, statuses[g], budget, counter)) out.push_back(std::move(*r));
    }
  }
  return out;
}

inline bool maybe_trigger(std::size_t active_tokens, std::size_t steps_since_last, const BudgetConfig& budget) {
  return active_tokens > budget.trigger_tokens || steps_since_last >= budget.periodic_interval_steps;
}

// ---------------------------------------------------------------------------
// Transcript files (JSONL, one message per line)

inline nlohmann::json to_json(const Message& m) {
  nlohmann::json j = {{"id", m.id}, {"role", std::string(to_string(m.role))}, {"text", m.text}};
  if (m.tool_call_args) j["tool_call_args"] = *m.tool_call_args;
  return j;
}

inline Message message_from_json(const nlohmann::json& j, const TokenCounter& counter = default_counter()) {
  std::optional<ToolArgs> args;
  if (j.contains("tool_call_args") && !j.at("tool_call_args").is_null()) args = j.at("tool_call_args").get<ToolArgs>();
  return make_message(j.at("id").get<int>(), role_from_string(j.at("role").get<std::string>()),
                      j.at("text").get<std::string>(), std::move(args), counter);
}

inline nlohmann::json to_json(const RenderedMessage& r) {
  nlohmann::json j = {{"id", r.id}, {"role", std::string(to_string(r.role))}, {"text", r.text},
                      {"status", std::string(to_string(r.status))}};
  if (r.args) j["tool_call_args"] = *r.args;
  return j;
}

}  // namespace agentga::context
