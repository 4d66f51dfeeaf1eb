#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <random>

#include "agentga/context.hpp"
#include "support.hpp"

using namespace agentga;
using namespace agentga::context;

namespace {

std::string words(std::size_t n, const std::string& stem = "w") {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += stem + std::to_string(i);
  }
  return s;
}

Summarizer head_fraction(double frac) {
  return [frac](const std::string& t) { return t.substr(0, static_cast<std::size_t>(t.size() * frac)); };
}

MessageHistory history_of(std::vector<Message> ms) {
  MessageHistory h;
  for (auto& m : ms) h.add(std::move(m));
  return h;
}

Message tool_call(int id, std::string text = "calling") {
  return make_message(id, Role::Ai, std::move(text), ToolArgs{{"code", "print(1)"}});
}

std::vector<GroupCosts> crafted_costs() {
  std::vector<GroupCosts> c;
  c.push_back({10, 8, 6});
  c.push_back({100, 40, 20});
  c.push_back({100, 40, 20});
  c.push_back({100, 30, 30});
  c.push_back({100, 30, 30});
  for (int i = 0; i < 3; ++i) c.push_back({10, 10, 10});
  return c;
}

BudgetConfig crafted_budget() {
  BudgetConfig b;
  b.recent_groups_protected = 3;
  b.target_tokens = 100;
  return b;
}

}  // namespace

TEST(TokenCount, Basics) {
  EXPECT_EQ(count_tokens(""), 0u);
  EXPECT_EQ(count_tokens("   \n\t"), 0u);
  EXPECT_EQ(count_tokens("hello world"), 2u);
  EXPECT_EQ(count_tokens("a.b"), 3u);
}

TEST(TokenCount, GoldenCorpus) {
  std::ifstream in(std::string(AGENTGA_TEST_DATA) + "/token_corpus.txt");
  ASSERT_TRUE(in);
  const std::vector<std::size_t> golden{4, 19, 12, 4, 6, 17, 19, 9, 0, 3, 9, 7};
  std::vector<std::size_t> got;
  std::string line;
  while (std::getline(in, line)) got.push_back(count_tokens(line));
  EXPECT_EQ(got, golden);
}

TEST(TokenCount, MonotoneUnderConcatenation) {
  std::mt19937_64 rng(1);
  const std::string alphabet = "ab_9 .,;\t\n()";
  std::uniform_int_distribution<std::size_t> len(0, 30), pick(0, alphabet.size() - 1);
  for (int i = 0; i < 2000; ++i) {
    std::string a, b;
    for (auto n = len(rng); n; --n) a += alphabet[pick(rng)];
    for (auto n = len(rng); n; --n) b += alphabet[pick(rng)];
    auto ab = count_tokens(a + b);
    EXPECT_GE(ab, std::max(count_tokens(a), count_tokens(b)));
  }
}

TEST(TokenCount, HeadRespectsLimit) {
  const auto& c = default_counter();
  auto text = words(100);
  EXPECT_EQ(c.count(c.head(text, 64)), 64u);
  EXPECT_EQ(c.head("short text", 64), "short text");
  EXPECT_EQ(c.head("a, b", 2), "a, ");
}

TEST(Grouping, ToolCallAbsorbsResponses) {
  auto h = history_of({tool_call(0), make_message(1, Role::Tool, "r1"), make_message(2, Role::Tool, "r2"),
                       make_message(3, Role::Ai, "done")});
  auto g = group_messages(h.messages);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[0].members, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(g[1].members, (std::vector<std::size_t>{3}));
}

TEST(Grouping, TextOnlyAndEmpty) {
  auto h = history_of({make_message(0, Role::System, "sys"), make_message(1, Role::Human, "hi"),
                       make_message(2, Role::Ai, "hello")});
  EXPECT_EQ(group_messages(h.messages).size(), 3u);
  EXPECT_TRUE(group_messages({}).empty());
}

TEST(Grouping, OrphanToolIsDiagnosedSingleton) {
  auto h = history_of({make_message(0, Role::Human, "hi"), make_message(1, Role::Tool, "stray")});
  std::vector<std::string> diags;
  auto g = group_messages(h.messages, &diags);
  EXPECT_EQ(g.size(), 2u);
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_NE(diags[0].find("orphan"), std::string::npos);
}

TEST(CompressPending, ShortMessagesCopied) {
  auto h = history_of({make_message(0, Role::Ai, words(40))});
  auto rep = compress_pending(h, head_fraction(0.1), BudgetConfig{});
  EXPECT_EQ(rep.copied_short, 1u);
  EXPECT_EQ(h.cache[0]->text, h.messages[0].text);
  EXPECT_EQ(h.compression[0], CompressionStatus::Compressed);
}

TEST(CompressPending, IdentitySummaryKeepsOriginal) {
  auto h = history_of({make_message(0, Role::Ai, words(500))});
  auto rep = compress_pending(h, [](const std::string& t) { return t; }, BudgetConfig{});
  EXPECT_EQ(rep.kept_original, 1u);
  EXPECT_EQ(h.cache[0]->text, h.messages[0].text);
}

TEST(CompressPending, TruncatingSummaryShrinks) {
  auto h = history_of({make_message(0, Role::Ai, words(1000))});
  ASSERT_EQ(h.messages[0].token_count, 1000u);
  EXPECT_EQ(h.compression[0], CompressionStatus::Pending);
  compress_pending(h, head_fraction(0.1), BudgetConfig{});
  EXPECT_LT(h.cache[0]->token_count, 1000u);
  EXPECT_EQ(h.compression[0], CompressionStatus::Compressed);
}

TEST(CompressPending, ToolArgumentsCompressedPerKey) {
  ToolArgs args{{"code", words(200, "line")}, {"path", "/data/train.csv"}};
  auto h = history_of({make_message(0, Role::Ai, "run it", args)});
  std::vector<std::string> seen;
  std::mutex mu;
  compress_pending(h, [&](const std::string& t) {
    std::lock_guard lock(mu);
    seen.push_back(t);
    return t.substr(0, 20);
  }, BudgetConfig{});
  ASSERT_EQ(seen.size(), 1u);  // only the long argument value is summarized
  EXPECT_EQ(h.cache[0]->args->at("path"), "/data/train.csv");
  EXPECT_LT(count_tokens(h.cache[0]->args->at("code")), 200u);
  EXPECT_EQ(h.cache[0]->text, "run it");
}

TEST(CompressPending, FailureLeavesPendingWithDiagnostic) {
  auto h = history_of({make_message(0, Role::Ai, words(100)), make_message(1, Role::Ai, words(100, "ok"))});
  auto rep = compress_pending(h, [](const std::string& t) -> std::string {
    if (t.starts_with("w0")) throw std::runtime_error("rate limited");
    return t.substr(0, 10);
  }, BudgetConfig{});
  EXPECT_EQ(rep.failures, 1u);
  EXPECT_EQ(h.compression[0], CompressionStatus::Pending);
  EXPECT_FALSE(h.cache[0]);
  EXPECT_EQ(h.compression[1], CompressionStatus::Compressed);
  ASSERT_EQ(h.diagnostics.size(), 1u);
  EXPECT_NE(h.diagnostics[0].find("rate limited"), std::string::npos);
  // a later pass retries only the pending message
  rep = compress_pending(h, head_fraction(0.1), BudgetConfig{});
  EXPECT_EQ(rep.processed, 1u);
  EXPECT_EQ(h.compression[0], CompressionStatus::Compressed);
}

TEST(CompressPending, BatchesBoundConcurrency) {
  std::vector<Message> ms;
  for (int i = 0; i < 9; ++i) ms.push_back(make_message(i, Role::Ai, words(80)));
  auto h = history_of(std::move(ms));
  std::atomic<int> active{0}, peak{0};
  int pauses = 0;
  BudgetConfig b;
  b.batch_size = 2;
  compress_pending(h, [&](const std::string& t) {
    int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {}
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    return t.substr(0, 5);
  }, b, default_counter(), [&] { ++pauses; });
  EXPECT_LE(peak.load(), 2);
  EXPECT_EQ(pauses, 4);
}

TEST(Selection, UnderBudgetIsNoop) {
  std::vector<GroupCosts> costs(10, GroupCosts{10, 5, 3});
  auto sel = select_statuses(costs, BudgetConfig{});
  for (auto s : sel.statuses) EXPECT_EQ(s, SelectionStatus::Original);
  EXPECT_EQ(sel.total_tokens, 100u);
  EXPECT_FALSE(sel.over_budget);
}

TEST(Selection, WindowDropsOldestBeyondFifty) {
  std::vector<GroupCosts> costs(60, GroupCosts{1, 1, 1});
  auto sel = select_statuses(costs, BudgetConfig{});
  EXPECT_EQ(sel.statuses[0], SelectionStatus::Original);
  for (std::size_t g = 1; g <= 10; ++g) EXPECT_EQ(sel.statuses[g], SelectionStatus::Drop) << g;
  for (std::size_t g = 11; g < 60; ++g) EXPECT_EQ(sel.statuses[g], SelectionStatus::Original) << g;
  EXPECT_EQ(sel.total_tokens, 50u);
}

TEST(Selection, CraftedStagedWalk) {
  auto sel = select_statuses(crafted_costs(), crafted_budget());
  using S = SelectionStatus;
  const std::vector<S> expected{S::Truncate,   S::Drop,     S::Drop,     S::Compressed,
                                S::Compressed, S::Original, S::Original, S::Original};
  EXPECT_EQ(sel.statuses, expected);
  EXPECT_EQ(sel.total_tokens, 96u);
  EXPECT_FALSE(sel.over_budget);
}

TEST(Selection, UnreachableBudgetFlagged) {
  std::vector<GroupCosts> costs(8, GroupCosts{100, 90, 80});
  BudgetConfig b;
  b.target_tokens = 10;
  auto sel = select_statuses(costs, b);
  EXPECT_TRUE(sel.over_budget);
  EXPECT_EQ(sel.statuses[0], SelectionStatus::Truncate);
  for (std::size_t g = 1; g < 3; ++g) EXPECT_EQ(sel.statuses[g], SelectionStatus::Drop);
  for (std::size_t g = 3; g < 8; ++g) EXPECT_EQ(sel.statuses[g], SelectionStatus::Original);
}

TEST(Selection, PendingGroupsSkipCompressedStage) {
  std::vector<GroupCosts> costs{{10, std::nullopt, 5}, {100, std::nullopt, 20}, {1, 1, 1}};
  BudgetConfig b;
  b.recent_groups_protected = 1;
  b.target_tokens = 40;
  auto sel = select_statuses(costs, b);
  EXPECT_EQ(sel.statuses[0], SelectionStatus::Truncate);
  EXPECT_EQ(sel.statuses[1], SelectionStatus::Truncate);
  EXPECT_EQ(sel.total_tokens, 26u);
}

TEST(Selection, ReservedTokensCountAgainstTarget) {
  std::vector<GroupCosts> costs(7, GroupCosts{10, 5, 2});
  BudgetConfig b;
  b.target_tokens = 70;
  EXPECT_EQ(select_statuses(costs, b).statuses[0], SelectionStatus::Original);
  auto sel = select_statuses(costs, b, 5);
  EXPECT_EQ(sel.statuses[0], SelectionStatus::Compressed);
  EXPECT_EQ(sel.total_tokens, 70u);
}

TEST(Selection, MonotoneUnderRisingPressure) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> ng(1, 70), cost(1, 200);
  for (int c = 0; c < 200; ++c) {
    std::vector<GroupCosts> costs(ng(rng));
    for (auto& g : costs) {
      g.original = cost(rng);
      g.compressed = std::min(g.original, cost(rng));
      g.truncate = std::min(g.original, cost(rng));
    }
    BudgetConfig b;
    std::vector<SelectionStatus> prev;
    for (std::size_t target = 5000; target > 0; target = target * 3 / 4) {
      b.target_tokens = target;
      auto sel = select_statuses(costs, b);
      if (!prev.empty()) {
        for (std::size_t g = 0; g < costs.size(); ++g) EXPECT_GE(sel.statuses[g], prev[g]);
      }
      prev = sel.statuses;
    }
  }
}

TEST(Reconstruct, AllOriginalIsIdentity) {
  auto h = history_of({make_message(0, Role::System, "sys prompt"), tool_call(1), make_message(2, Role::Tool, "out"),
                       make_message(3, Role::Ai, "Naïve café — ok")});
  auto groups = group_messages(h.messages);
  auto r = reconstruct_context(h, groups, std::vector<SelectionStatus>(groups.size(), SelectionStatus::Original),
                               BudgetConfig{});
  ASSERT_EQ(r.size(), h.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(r[i].text, h.messages[i].text);
    EXPECT_EQ(r[i].args, h.messages[i].tool_call_args);
  }
}

TEST(Reconstruct, ProtectedOnlySurvivesFullDrop) {
  std::vector<Message> ms;
  for (int i = 0; i < 12; ++i) ms.push_back(make_message(i, Role::Ai, words(300)));
  auto h = history_of(std::move(ms));
  auto groups = group_messages(h.messages);
  BudgetConfig b;
  b.target_tokens = 1;
  auto costs = group_costs(h, groups, b);
  auto sel = select_statuses(costs, b);
  EXPECT_TRUE(sel.over_budget);
  auto r = reconstruct_context(h, groups, sel.statuses, b);
  ASSERT_EQ(r.size(), 6u);
  EXPECT_EQ(r[0].id, 0);
  EXPECT_EQ(r[0].status, SelectionStatus::Truncate);
  EXPECT_TRUE(r[0].text.ends_with(kElisionMarker));
  for (std::size_t i = 1; i < 6; ++i) EXPECT_EQ(r[i].id, static_cast<int>(6 + i));
}

TEST(Reconstruct, CraftedHistoryRendersWithinTarget) {
  // messages whose real costs reproduce the crafted instance under the default counter
  BudgetConfig b = crafted_budget();
  b.truncate_tokens = 20;
  auto h = history_of({make_message(0, Role::System, words(10)), make_message(1, Role::Ai, words(100)),
                       make_message(2, Role::Ai, words(100)), make_message(3, Role::Ai, words(100, "z")),
                       make_message(4, Role::Ai, words(100, "z")), make_message(5, Role::Human, words(10)),
                       make_message(6, Role::Ai, words(10)), make_message(7, Role::Human, words(10))});
  compress_pending(h, [](const std::string& t) { return t.substr(0, t.size() * 2 / 5); }, b);
  auto groups = group_messages(h.messages);
  auto costs = group_costs(h, groups, b);
  auto sel = select_statuses(costs, b);
  EXPECT_FALSE(sel.over_budget);
  auto r = reconstruct_context(h, groups, sel.statuses, b);
  std::size_t total = 0;
  for (const auto& m : r) total += rendered_tokens(m, default_counter());
  EXPECT_EQ(total, sel.total_tokens);
  EXPECT_LE(total, b.target_tokens);
}

TEST(Trigger, Thresholds) {
  BudgetConfig b;
  EXPECT_TRUE(maybe_trigger(100'001, 0, b));
  EXPECT_TRUE(maybe_trigger(50'000, 100, b));
  EXPECT_FALSE(maybe_trigger(99'999, 99, b));
  EXPECT_FALSE(maybe_trigger(100'000, 0, b));
}

TEST(Budget, Validation) {
  BudgetConfig b;
  EXPECT_NO_THROW(validate(b));
  b.target_tokens = b.trigger_tokens;
  EXPECT_THROW(validate(b), ConfigError);
  b = BudgetConfig{};
  b.recent_groups_protected = 60;
  EXPECT_THROW(validate(b), ConfigError);
}

TEST(Transcript, MessageJsonRoundTrip) {
  auto m = make_message(7, Role::Ai, "call", ToolArgs{{"code", "x = 1"}});
  auto back = message_from_json(to_json(m));
  EXPECT_EQ(back.id, 7);
  EXPECT_EQ(back.role, Role::Ai);
  EXPECT_EQ(back.tool_call_args, m.tool_call_args);
  EXPECT_EQ(back.token_count, m.token_count);
  EXPECT_THROW(message_from_json(nlohmann::json{{"id", 1}, {"role", "robot"}, {"text", ""}}), ConfigError);
}
