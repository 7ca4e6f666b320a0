// SPDX-License-Identifier: Apache-2.0
#include "webpilot/agents/agents.hpp"

#include "fake_driver.hpp"
#include "helpers.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace webpilot;
using namespace webpilot::agents;
using testsupport::sequence;
using testsupport::text_reply;
using testsupport::tool_reply;
using Kinds = std::vector<EventKind>;

namespace {

const std::string home = "http://fixture.test/index.html";
const std::string shop = "http://fixture.test/shop.html";

struct Episode : ::testing::Test {
    testsupport::FakeDriver driver;
    testsupport::EventRecorder rec;
    std::shared_ptr<llm::TranscriptLog> transcript = std::make_shared<llm::TranscriptLog>();

    void SetUp() override
    {
        driver.add_button_page(home, 3);
        driver.add_button_page(shop, 2);
    }

    EpisodeResult run(llm::ModelSet models, EpisodeConfig cfg = {}, std::optional<Plan> plan = {},
                      memory::WorkflowStore* store = nullptr, const std::atomic<bool>* cancel = nullptr)
    {
        models.attach_transcript(transcript);
        return run_episode(Goal("open the shop and pick an item", home), plan, cfg,
                           {driver, models, store, rec.sink(), cancel});
    }

    /// Every prompt sent under the "policy" label, rendered.
    std::vector<std::string> policy_prompts() const
    {
        std::vector<std::string> out;
        for (auto const& e : transcript->snapshot())
            if (e.label == "policy")
                out.push_back(llm::render_request(e.request));
        return out;
    }
};

void expect_no_page_payload(const std::vector<std::string>& prompts)
{
    for (auto const& p : prompts)
        for (auto marker : {testsupport::axtree_marker, testsupport::dom_marker, testsupport::som_marker})
            EXPECT_EQ(p.find(marker), std::string::npos) << marker << " leaked into:\n" << p;
}

} // namespace

TEST_F(Episode, NavigateClickStop)
{
    auto policy = sequence({tool_reply("navigate", {{"url", shop}}), tool_reply("click", {{"target", "first button"}}),
                            text_reply("task complete")});
    auto grounder = sequence({tool_reply("navigate", {{"url", shop}}), tool_reply("click", {{"mark", "1"}})});
    auto r = run(testsupport::roles(policy, grounder));

    ASSERT_EQ(r.trajectory.size(), 2u);
    for (auto const& s : r.trajectory.steps())
        EXPECT_TRUE(s.evaluation().ok()) << s.evaluation().message();
    EXPECT_EQ(r.reason, TerminalReason::policy_stop);
    EXPECT_EQ(r.trajectory.steps()[0].pre_url(), home);
    EXPECT_EQ(r.trajectory.steps()[1].grounded()->selector(), "#b1");
    EXPECT_EQ(r.trajectory.steps()[1].post_url(), shop + "#1");
    EXPECT_EQ(r.final_plan.revision(), 0);

    Kinds expected{EventKind::plan_generated,  EventKind::action_generated, EventKind::action_grounded,
                   EventKind::action_executed, EventKind::action_generated, EventKind::action_grounded,
                   EventKind::action_executed, EventKind::done};
    EXPECT_EQ(rec.kinds(), expected);
    for (std::size_t i = 0; i < rec.events.size(); ++i)
        EXPECT_EQ(rec.events[i].seq, static_cast<long>(i) + 1);
    EXPECT_EQ(rec.events[1].step_index, 0);
    EXPECT_EQ(rec.events[6].step_index, 1);
    EXPECT_EQ(rec.events.back().payload["steps"], 2);
    EXPECT_EQ(rec.events.back().payload["reason"], "policy_stop");
    expect_no_page_payload(policy_prompts());
}

TEST_F(Episode, CapsAtMaxSteps)
{
    for (int calls : {25, 1000}) {
        rec.events.clear();
        std::vector<llm::RawReply> script(static_cast<std::size_t>(calls), tool_reply("scroll", {{"direction", "down"}}));
        auto policy = sequence(script);
        auto grounder = sequence({}, tool_reply("scroll", {{"direction", "down"}}));
        EpisodeConfig cfg;
        cfg.max_steps = 20;
        auto r = run(testsupport::roles(policy, grounder), cfg);
        EXPECT_EQ(r.trajectory.size(), 20u);
        EXPECT_EQ(r.reason, TerminalReason::max_steps);
        EXPECT_EQ(policy->call_count(), 20);
        EXPECT_EQ(rec.events.back().kind, EventKind::done);
        EXPECT_EQ(rec.events.back().payload["reason"], "max_steps");
    }
}

TEST_F(Episode, GroundingFailureIsRecordedAndLoopContinues)
{
    auto policy = sequence({tool_reply("click", {{"target", "missing"}}), tool_reply("click", {{"target", "b2"}}),
                            text_reply("stop")});
    auto grounder = sequence({tool_reply("click", {{"mark", "99"}}), tool_reply("click", {{"mark", "2"}})});
    auto r = run(testsupport::roles(policy, grounder));
    ASSERT_EQ(r.trajectory.size(), 2u);
    EXPECT_FALSE(r.trajectory.steps()[0].evaluation().ok());
    EXPECT_FALSE(r.trajectory.steps()[0].grounded());
    EXPECT_TRUE(r.trajectory.steps()[1].evaluation().ok());
    EXPECT_EQ(rec.events[2].payload["reason"], "unresolvable_target");
    // The failure reached the policy as history.
    auto prompts = policy_prompts();
    ASSERT_EQ(prompts.size(), 3u);
    EXPECT_NE(prompts[1].find("grounding failed"), std::string::npos);
}

TEST_F(Episode, FinishActionStops)
{
    auto policy = sequence({tool_reply("finish", {{"answer", "42"}}), tool_reply("click", {{"target", "x"}})});
    auto grounder = sequence({tool_reply("finish", {{"answer", "42"}})});
    auto r = run(testsupport::roles(policy, grounder));
    EXPECT_EQ(r.reason, TerminalReason::finish);
    EXPECT_EQ(r.trajectory.size(), 1u);
    EXPECT_EQ(policy->call_count(), 1);
}

TEST_F(Episode, DriverLossEndsWithErrorAndPartialTrajectory)
{
    driver.fail_after(1);
    auto policy = sequence({}, tool_reply("scroll", {{"direction", "down"}}));
    auto grounder = sequence({}, tool_reply("scroll", {{"direction", "down"}}));
    auto r = run(testsupport::roles(policy, grounder));
    EXPECT_EQ(r.reason, TerminalReason::error);
    EXPECT_EQ(r.trajectory.size(), 1u);
    EXPECT_EQ(rec.events.back().kind, EventKind::error);
    EXPECT_EQ(rec.events.back().payload["steps"], 1);
    int terminals = 0;
    for (auto const& e : rec.events)
        terminals += is_terminal(e.kind);
    EXPECT_EQ(terminals, 1);
}

TEST_F(Episode, InitialNavigationFailure)
{
    auto policy = sequence({});
    auto grounder = sequence({});
    llm::ModelSet models = testsupport::roles(policy, grounder);
    auto r = run_episode(Goal("x", "http://nowhere.test/"), {}, {}, {driver, models, nullptr, rec.sink(), nullptr});
    EXPECT_EQ(r.reason, TerminalReason::error);
    EXPECT_EQ(rec.kinds(), (Kinds{EventKind::plan_generated, EventKind::error}));
}

TEST_F(Episode, CancelBeforeFirstStep)
{
    std::atomic<bool> cancel{true};
    auto policy = sequence({}, tool_reply("scroll", {{"direction", "down"}}));
    auto r = run(testsupport::roles(policy, sequence({})), {}, {}, nullptr, &cancel);
    EXPECT_EQ(r.reason, TerminalReason::cancelled);
    EXPECT_EQ(policy->call_count(), 0);
    EXPECT_EQ(rec.events.back().kind, EventKind::done);
}

TEST_F(Episode, HighLevelPlanningReplans)
{
    auto policy = sequence({tool_reply("click", {{"target", "b1"}}), tool_reply("scroll", {{"direction", "down"}}),
                            text_reply("done")});
    auto grounder = sequence({tool_reply("click", {{"mark", "1"}}), tool_reply("scroll", {{"direction", "down"}})});
    auto planner = sequence({text_reply("1. open site 2. fill form 3. submit"), text_reply("retry login"),
                             text_reply("wrap up")});
    EpisodeConfig cfg;
    cfg.kind = AgentKind::high_level_planning;
    auto r = run(testsupport::roles(policy, grounder, planner), cfg);
    EXPECT_EQ(r.trajectory.initial_plan().text(), "1. open site 2. fill form 3. submit");
    EXPECT_EQ(r.trajectory.initial_plan().provenance(), PlanProvenance::generated);
    EXPECT_EQ(r.final_plan.revision(), 2);
    EXPECT_EQ(r.final_plan.text(), "wrap up");
    int replans = 0;
    int last_revision = 0;
    for (auto const& e : rec.events)
        if (e.kind == EventKind::replanned) {
            ++replans;
            int rev = e.payload["plan"]["revision"];
            EXPECT_GT(rev, last_revision);
            last_revision = rev;
        }
    EXPECT_EQ(replans, 2);
    // Policy sees x0 and the latest x_t.
    auto prompts = policy_prompts();
    ASSERT_EQ(prompts.size(), 3u);
    EXPECT_NE(prompts[1].find("1. open site"), std::string::npos);
    EXPECT_NE(prompts[1].find("Current plan (revision 1):\nretry login"), std::string::npos);
    EXPECT_EQ(prompts[2].find("retry login"), std::string::npos);
    expect_no_page_payload(prompts);
}

TEST_F(Episode, ContextAwarePlannerSeesPageButPolicyDoesNot)
{
    auto policy = sequence({tool_reply("click", {{"target", "b1"}}), text_reply("done")});
    auto grounder = sequence({tool_reply("click", {{"mark", "1"}})});
    auto planner = sequence({text_reply("plan"), text_reply("revised")});
    EpisodeConfig cfg;
    cfg.kind = AgentKind::context_aware_planning;
    run(testsupport::roles(policy, grounder, planner), cfg);
    bool planner_saw_page = false;
    for (auto const& e : transcript->snapshot())
        if (e.label == "planner" && llm::render_request(e.request).find(testsupport::axtree_marker) != std::string::npos)
            planner_saw_page = true;
    EXPECT_TRUE(planner_saw_page);
    expect_no_page_payload(policy_prompts());
}

TEST_F(Episode, UserPlanSkipsPlanner)
{
    auto planner = sequence({});
    auto r = run(testsupport::roles(sequence({text_reply("nothing to do")}), sequence({}), planner), {},
                 Plan::user_supplied("my plan"));
    EXPECT_EQ(planner->call_count(), 0);
    EXPECT_EQ(r.trajectory.initial_plan().provenance(), PlanProvenance::user_supplied);
    EXPECT_EQ(rec.events[0].payload["plan"]["text"], "my plan");
}

TEST_F(Episode, MemoryFeedsPlannerAndInducesWorkflow)
{
    auto path = std::filesystem::temp_directory_path() / ("wp-agents-" + std::to_string(::getpid()) + ".jsonl");
    std::filesystem::remove(path);
    memory::WorkflowStore store(path);
    auto t0 = std::chrono::system_clock::now() - std::chrono::hours(1);
    store.append({"pick an item from the shop", "fixture.test", {"click \"Add to cart\""}, t0, 0});
    store.append({"open the shop", "fixture.test", {"navigate {url}"}, t0 + std::chrono::minutes(1), 0});

    auto policy = sequence({tool_reply("click", {{"target", "b1"}}), text_reply("done")});
    auto grounder = sequence({tool_reply("click", {{"mark", "1"}})});
    auto planner = sequence({text_reply("use the workflow")});
    EpisodeConfig cfg;
    cfg.memory_enabled = true;
    auto r = run(testsupport::roles(policy, grounder, planner), cfg, {}, &store);

    std::string planner_prompt;
    for (auto const& e : transcript->snapshot())
        if (e.label == "planner")
            planner_prompt = llm::render_request(e.request);
    auto first = planner_prompt.find("pick an item from the shop");
    auto second = planner_prompt.find("open the shop (");
    ASSERT_NE(first, std::string::npos) << planner_prompt;
    ASSERT_NE(second, std::string::npos) << planner_prompt;
    EXPECT_NE(planner_prompt.find("Relevant workflows"), std::string::npos);
    EXPECT_EQ(rec.events[0].payload["workflows"].size(), 2u);
    ASSERT_TRUE(r.induced_workflow);
    EXPECT_EQ(store.snapshot().entries.size(), 3u);
    std::filesystem::remove(path);
}

TEST(Policy, FunctionCallingRendering)
{
    Goal goal("g", "http://a.test/");
    auto plan = Plan::user_supplied("p");
    History history;
    PolicyContext ctx{goal, plan, nullptr, history};
    auto m = sequence({tool_reply("click", {{"mark", "3"}}), text_reply("task complete")});
    auto a = next_action(ctx, AgentKind::function_calling, *m, grounding::policy_tools(), {});
    ASSERT_TRUE(a);
    EXPECT_EQ(a->text(), "click element [3]");
    EXPECT_FALSE(next_action(ctx, AgentKind::function_calling, *m, grounding::policy_tools(), {}));

    EXPECT_EQ(render_action({"navigate", {{"url", "https://x.test/"}}, {}}), "navigate https://x.test/");
    EXPECT_EQ(render_action({"fill", {{"target", "Email"}, {"value", "a@b.c"}}, {}}), "fill \"Email\" with \"a@b.c\"");
    EXPECT_EQ(render_action({"scroll", {{"direction", "down"}}, {}}), "scroll down");
}

TEST(Policy, PromptKindUntilFinish)
{
    Goal goal("g", "http://a.test/");
    auto plan = Plan::user_supplied("p");
    History history;
    PolicyContext ctx{goal, plan, nullptr, history};
    auto m = sequence({text_reply("type 'alice' into the username field"), text_reply("FINISH")});
    auto a = next_action(ctx, AgentKind::prompt, *m, {}, {});
    ASSERT_TRUE(a);
    EXPECT_EQ(a->text(), "type 'alice' into the username field");
    EXPECT_FALSE(next_action(ctx, AgentKind::prompt, *m, {}, {}));

    auto garbage = sequence({text_reply(""), text_reply("   ")});
    EXPECT_THROW(next_action(ctx, AgentKind::prompt, *garbage, {}, {}), PolicyError);

    auto before_finish = sequence({text_reply("click the login button\nFINISH")});
    EXPECT_EQ(next_action(ctx, AgentKind::prompt, *before_finish, {}, {})->text(), "click the login button");
}

TEST(Policy, ReplanContracts)
{
    Goal goal("g", "http://a.test/");
    auto plan = Plan::generated("p");
    History history;
    PolicyContext ctx{goal, plan, nullptr, history};
    auto m = sequence({text_reply("retry login with corrected field")});
    auto next = replan(ctx, plan, AgentKind::high_level_planning, nullptr, {}, *m, {});
    EXPECT_EQ(next.revision(), 1);
    EXPECT_EQ(next.provenance(), PlanProvenance::replanned);
    EXPECT_THROW(replan(ctx, plan, AgentKind::context_aware_planning, nullptr, {}, *m, {}), PreconditionError);
    EXPECT_THROW(replan(ctx, plan, AgentKind::function_calling, nullptr, {}, *m, {}), PreconditionError);
}

TEST(Policy, GeneratedPlan)
{
    auto m = sequence({text_reply("1. open site 2. fill form 3. submit")});
    auto p = generate_initial_plan(Goal("g", "http://a.test/"), {}, *m, {});
    EXPECT_EQ(p.text(), "1. open site 2. fill form 3. submit");
    EXPECT_EQ(p.revision(), 0);
    EXPECT_EQ(p.provenance(), PlanProvenance::generated);
}
