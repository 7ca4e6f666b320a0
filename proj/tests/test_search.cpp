// SPDX-License-Identifier: Apache-2.0
#include "webpilot/search/tree_search.hpp"

#include "search_world.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

using namespace webpilot;
using namespace webpilot::search;
using testsupport::node_letters;
using testsupport::SearchWorld;
using testsupport::text_reply;
using testsupport::tool_reply;

namespace {

double count_a(const std::string& path)
{
    return static_cast<double>(std::count(path.begin(), path.end(), 'A')) / 4.0;
}

SearchConfig simple(Strategy s, int depth)
{
    SearchConfig cfg;
    cfg.strategy = s;
    cfg.branching = 2;
    cfg.max_depth = depth;
    cfg.iterations = 100;
    return cfg;
}

} // namespace

TEST(Uct, Examples)
{
    EXPECT_EQ(uct_score(0.0, 0, 10, std::sqrt(2.0)), std::numeric_limits<double>::infinity());
    // 0.5 + 1.41421 * sqrt(ln 10 / 2) = 0.5 + 1.41421 * 1.07298 = 2.0174
    EXPECT_NEAR(uct_score(1.0, 2, 10, 1.41421), 2.0174, 1e-3);
    EXPECT_DOUBLE_EQ(uct_score(0.9, 1, 7, 0.0), 0.9);
}

TEST(ValueReply, Parsing)
{
    auto v = parse_value_reply("0.8");
    ASSERT_TRUE(v);
    EXPECT_DOUBLE_EQ(v->value, 0.8);
    EXPECT_FALSE(v->clamped);
    auto hi = parse_value_reply("Score: 1.7");
    ASSERT_TRUE(hi);
    EXPECT_DOUBLE_EQ(hi->value, 1.0);
    EXPECT_TRUE(hi->clamped);
    EXPECT_FALSE(parse_value_reply("great job"));
}

TEST(ValueOf, UnparseableTwiceScoresZero)
{
    Goal goal("g", "http://a.test/");
    auto plan = Plan::user_supplied("p");
    Trajectory t(goal, plan);
    t.append(TrajectoryStep(ActionDescription("scroll down", 0),
                            GroundedAction(ActionKind::scroll, std::nullopt, {{"direction", "down"}}, 0),
                            EvaluationRecord::success("ok"), "http://a.test/", "http://a.test/"));
    auto m = testsupport::sequence({text_reply("great job"), text_reply("great job")});
    auto v = value_of(goal, plan, t, testsupport::tiny_png(), *m, {});
    EXPECT_EQ(v.value, 0.0);
    EXPECT_TRUE(v.unparseable);
    EXPECT_EQ(m->call_count(), 2);

    auto ok = testsupport::sequence({text_reply("0.8")});
    EXPECT_DOUBLE_EQ(value_of(goal, plan, t, std::nullopt, *ok, {}).value, 0.8);
    auto clamp = testsupport::sequence({text_reply("1.7")});
    auto c = value_of(goal, plan, t, std::nullopt, *clamp, {});
    EXPECT_DOUBLE_EQ(c.value, 1.0);
    EXPECT_TRUE(c.clamped);
}

TEST(SampleActions, DedupAndTerminal)
{
    Goal goal("g", "http://a.test/");
    auto plan = Plan::user_supplied("p");
    agents::History history;
    agents::PolicyContext ctx{goal, plan, nullptr, history};

    llm::RawReply three{{}, {{"click", {{"mark", "1"}}, {}}, {"scroll", {{"direction", "down"}}, {}},
                             {"navigate", {{"url", "http://b.test/"}}, {}}}};
    EXPECT_EQ(sample_actions(ctx, 3, *testsupport::sequence({three}), {}, 1.0).size(), 3u);

    llm::RawReply dup{{}, {{"click", {{"mark", "3"}}, {}}, {"click", {{"mark", "3"}}, {}},
                           {"navigate", {{"url", "http://b.test/"}}, {}}}};
    auto got = sample_actions(ctx, 3, *testsupport::sequence({dup}), {}, 1.0);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[0].text(), "click element [3]");

    EXPECT_TRUE(sample_actions(ctx, 3, *testsupport::sequence({text_reply("nothing left")}), {}, 1.0).empty());

    // The requested sample count reaches the provider.
    int seen_choices = 0;
    llm::CallbackModel probe([&](const llm::ChatRequest& r) {
        seen_choices = r.choices;
        return text_reply("x");
    });
    sample_actions(ctx, 4, probe, {}, 1.0);
    EXPECT_EQ(seen_choices, 4);
}

TEST(SimpleSearch, FifteenNodesBfsLevelOrder)
{
    SearchWorld w(count_a);
    TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), simple(Strategy::bfs, 3), w.deps());
    s.run_simple();
    auto const& tree = s.tree();
    EXPECT_EQ(tree.size(), 15u);
    ASSERT_EQ(tree.visit_order().size(), 15u);
    int last_depth = 0;
    for (int id : tree.visit_order()) {
        EXPECT_GE(tree.node(id).depth, last_depth);
        last_depth = tree.node(id).depth;
        EXPECT_LE(tree.node(id).depth, 3);
    }
    auto best = best_node(tree, Strategy::bfs);
    EXPECT_EQ(node_letters(tree, best), "AAA");
    EXPECT_DOUBLE_EQ(*tree.node(best).value, 0.75);
}

TEST(SimpleSearch, DfsPreorder)
{
    SearchWorld w(count_a);
    TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), simple(Strategy::dfs, 2), w.deps());
    s.run_simple();
    std::vector<std::string> order;
    for (int id : s.tree().visit_order())
        order.push_back(node_letters(s.tree(), id));
    EXPECT_EQ(order, (std::vector<std::string>{"", "A", "AA", "AB", "B", "BA", "BB"}));
}

TEST(SimpleSearch, BfsAndDfsAgree)
{
    SearchWorld wb(count_a), wd(count_a);
    TreeSearch bfs(SearchWorld::goal(), SearchWorld::plan(), simple(Strategy::bfs, 3), wb.deps());
    TreeSearch dfs(SearchWorld::goal(), SearchWorld::plan(), simple(Strategy::dfs, 3), wd.deps());
    bfs.run_simple();
    dfs.run_simple();
    EXPECT_EQ(dfs.tree().size(), 15u);
    std::set<std::string> bset, dset;
    for (std::size_t i = 0; i < 15; ++i) {
        bset.insert(node_letters(bfs.tree(), static_cast<int>(i)));
        dset.insert(node_letters(dfs.tree(), static_cast<int>(i)));
    }
    EXPECT_EQ(bset, dset);
    // Preorder: every node appears after its parent and before any later sibling's subtree.
    auto const& order = dfs.tree().visit_order();
    for (std::size_t i = 1; i < order.size(); ++i) {
        auto prev = node_letters(dfs.tree(), order[i - 1]);
        auto cur = node_letters(dfs.tree(), order[i]);
        EXPECT_TRUE(prev < cur) << prev << " then " << cur;
    }
    auto vb = *bfs.tree().node(best_node(bfs.tree(), Strategy::bfs)).value;
    auto vd = *dfs.tree().node(best_node(dfs.tree(), Strategy::dfs)).value;
    EXPECT_DOUBLE_EQ(vb, vd);
    EXPECT_EQ(bfs.best_trajectory().size(), 3u);
}

TEST(SimpleSearch, ExpansionBudget)
{
    SearchWorld w(count_a);
    auto cfg = simple(Strategy::bfs, 3);
    cfg.iterations = 2;
    TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), cfg, w.deps());
    s.run_simple();
    EXPECT_EQ(s.tree().size(), 5u);
}

namespace {

struct MctsStats {
    std::map<int, int> leaf_ends;   // iterations that ended (were evaluated or re-scored) at a node
};

/// Runs iterations one by one, attributing each to the deepest node whose N moved.
MctsStats run_tracked(TreeSearch& s, int iterations)
{
    MctsStats stats;
    for (int i = 0; i < iterations; ++i) {
        std::vector<int> before;
        for (auto const& n : s.tree().nodes())
            before.push_back(n.visits);
        bool ok = s.mcts_iteration();
        if (!ok)
            continue;
        int leaf = 0;
        for (auto const& n : s.tree().nodes()) {
            int prev = n.id < static_cast<int>(before.size()) ? before[static_cast<std::size_t>(n.id)] : 0;
            if (n.visits > prev && n.depth >= s.tree().node(leaf).depth)
                leaf = n.id;
        }
        ++stats.leaf_ends[leaf];
    }
    return stats;
}

void expect_conservation(const SearchTree& tree, const MctsStats& stats)
{
    for (auto const& n : tree.nodes()) {
        int kids = 0;
        for (int c : n.children)
            kids += tree.node(c).visits;
        auto it = stats.leaf_ends.find(n.id);
        int ends = it == stats.leaf_ends.end() ? 0 : it->second;
        EXPECT_EQ(n.visits, kids + ends) << "node " << n.id;
        if (n.visits > 0) {
            EXPECT_GE(*n.mean_value(), 0.0);
            EXPECT_LE(*n.mean_value(), 1.0);
        }
        EXPECT_LE(n.depth, 3);
    }
}

SearchConfig mcts_cfg()
{
    SearchConfig cfg;
    cfg.strategy = Strategy::mcts;
    cfg.branching = 2;
    cfg.max_depth = 3;
    cfg.iterations = 20;
    return cfg;
}

} // namespace

TEST(Mcts, FirstIterationShape)
{
    SearchWorld w([](const std::string&) { return 0.4; });
    TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), mcts_cfg(), w.deps());
    ASSERT_TRUE(s.mcts_iteration());
    auto const& root = s.tree().root();
    EXPECT_EQ(root.visits, 1);
    ASSERT_EQ(root.children.size(), 2u);
    auto const& first = s.tree().node(root.children[0]);
    EXPECT_EQ(first.visits, 1);
    EXPECT_DOUBLE_EQ(first.total_value, 0.4);
    EXPECT_EQ(s.tree().node(root.children[1]).visits, 0);
}

TEST(Mcts, StatisticsAndPreference)
{
    for (char good : {'A', 'B'}) {
        SearchWorld w([good](const std::string& p) { return !p.empty() && p[0] == good ? 1.0 : 0.0; });
        TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), mcts_cfg(), w.deps());
        auto stats = run_tracked(s, 20);
        auto const& tree = s.tree();
        EXPECT_EQ(tree.root().visits, s.completed_iterations());
        EXPECT_EQ(s.completed_iterations(), 20);
        expect_conservation(tree, stats);
        auto const& kids = tree.root().children;
        ASSERT_EQ(kids.size(), 2u);
        int good_id = node_letters(tree, kids[0])[0] == good ? kids[0] : kids[1];
        int other_id = good_id == kids[0] ? kids[1] : kids[0];
        EXPECT_GT(tree.node(good_id).visits, tree.node(other_id).visits) << "good branch " << good;
        EXPECT_EQ(node_letters(tree, best_node(tree, Strategy::mcts))[0], good);
    }
}

TEST(Mcts, ConservationWithGradedValues)
{
    SearchWorld w(count_a);
    auto cfg = mcts_cfg();
    TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), cfg, w.deps());
    auto stats = run_tracked(s, 30);
    EXPECT_EQ(s.tree().root().visits, 30);
    expect_conservation(s.tree(), stats);
}

TEST(Mcts, Deterministic)
{
    auto run = [] {
        SearchWorld w(count_a);
        TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), mcts_cfg(), w.deps());
        s.run_mcts();
        return s.tree().export_json().dump();
    };
    EXPECT_EQ(run(), run());
}

TEST(Mcts, DivergenceMarksInvalid)
{
    SearchWorld w(count_a);
    TreeSearch s(SearchWorld::goal(), SearchWorld::plan(), mcts_cfg(), w.deps());
    ASSERT_TRUE(s.mcts_iteration());   // evaluates A
    ASSERT_TRUE(s.mcts_iteration());   // evaluates B; browser now at B
    // A's recorded click on #b1 can no longer be replayed.
    w.driver.remove_element(testsupport::search_home, "#b1");
    int completed = s.completed_iterations();
    for (int i = 0; i < 5; ++i)
        s.mcts_iteration();
    auto const& root = s.tree().root();
    EXPECT_TRUE(s.tree().node(root.children[0]).invalid);
    EXPECT_EQ(root.visits, s.completed_iterations());
    EXPECT_GE(s.completed_iterations(), completed);
}

TEST(BestNode, TieRules)
{
    SearchTree tree;
    int a = tree.add_child(0, ActionDescription("a", 0));
    int b = tree.add_child(0, ActionDescription("b", 0));
    EXPECT_THROW(best_node(tree, Strategy::mcts), InvariantViolation);
    EXPECT_THROW(best_node(tree, Strategy::bfs), InvariantViolation);

    tree.node(a).visits = 5;
    tree.node(a).total_value = 1.0;
    tree.node(b).visits = 3;
    tree.node(b).total_value = 3.0;
    EXPECT_EQ(best_node(tree, Strategy::mcts), a);

    tree.node(a).visits = 3;
    tree.node(a).total_value = 3 * 0.4;
    tree.node(b).total_value = 3 * 0.9;
    EXPECT_EQ(best_node(tree, Strategy::mcts), b);

    tree.node(b).total_value = tree.node(a).total_value;
    EXPECT_EQ(best_node(tree, Strategy::mcts), a);

    tree.node(a).value = 0.5;
    tree.node(b).value = 0.5;
    tree.visit_order() = {0, b, a};
    EXPECT_EQ(best_node(tree, Strategy::dfs), b);
}

TEST(RunSearch, EventsAndOutcome)
{
    SearchWorld w(count_a);
    auto cfg = simple(Strategy::bfs, 2);
    auto out = run_search(SearchWorld::goal(), std::nullopt, cfg, w.deps());
    ASSERT_TRUE(out.best);
    EXPECT_EQ(out.best->size(), 2u);
    EXPECT_DOUBLE_EQ(out.best_value, 0.5);
    auto kinds = w.rec.kinds();
    EXPECT_EQ(kinds.front(), EventKind::plan_generated);
    EXPECT_EQ(kinds.back(), EventKind::done);
    EXPECT_EQ(std::count(kinds.begin(), kinds.end(), EventKind::search_progress), 6);
    auto const& done = w.rec.events.back().payload;
    EXPECT_EQ(done["tree"].size(), 7u);
    EXPECT_EQ(done["best_node"], out.best_node);
}

TEST(RunSearch, DriverLossIsErrorEvent)
{
    SearchWorld w(count_a);
    w.driver.fail_after(2);
    auto out = run_search(SearchWorld::goal(), std::nullopt, mcts_cfg(), w.deps());
    EXPECT_FALSE(out.best);
    EXPECT_EQ(w.rec.events.back().kind, EventKind::error);
}

TEST(RunSearch, CancelStopsEarly)
{
    SearchWorld w(count_a);
    std::atomic<bool> cancel{true};
    auto out = run_search(SearchWorld::goal(), std::nullopt, mcts_cfg(), w.deps(&cancel));
    EXPECT_EQ(out.completed_iterations, 0);
    EXPECT_EQ(w.rec.events.back().kind, EventKind::error);   // nothing evaluated
}
