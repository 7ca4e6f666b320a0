// SPDX-License-Identifier: Apache-2.0
#include "webpilot/browser/cdp_connection.hpp"
#include "webpilot/browser/cdp_page.hpp"

#include "mock_cdp_server.hpp"

#include <gtest/gtest.h>

#include <set>
#include <thread>

using namespace webpilot::browser;
using nlohmann::json;
using namespace std::chrono_literals;

TEST(CdpFraming, IdsIncreaseAndResponsesMatch)
{
    testsupport::MockCdpServer mock;
    auto conn = CdpConnection::connect(mock.ws_url());
    conn->record_frames(true);

    std::vector<std::thread> workers;
    std::atomic<int> mismatches{0};
    for (int w = 0; w < 4; ++w)
        workers.emplace_back([&, w] {
            for (int i = 0; i < 10; ++i) {
                auto tag = std::to_string(w) + "-" + std::to_string(i);
                auto r = conn->send("Echo.ping", {{"tag", tag}});
                if (r.value("method", "") != "Echo.ping" || r["echo"].value("tag", "") != tag)
                    ++mismatches;
            }
        });
    for (auto& t : workers)
        t.join();
    EXPECT_EQ(mismatches, 0);

    long last = 0;
    std::set<long> sent_ids;
    std::multiset<long> answered;
    for (auto const& f : conn->frames()) {
        if (f.outgoing) {
            long id = f.message.at("id").get<long>();
            EXPECT_GT(id, last);
            last = id;
            sent_ids.insert(id);
        } else if (f.message.contains("id")) {
            answered.insert(f.message["id"].get<long>());
        }
    }
    EXPECT_EQ(sent_ids.size(), 40u);
    for (long id : sent_ids)
        EXPECT_EQ(answered.count(id), 1u) << "id " << id;
    EXPECT_EQ(answered.size(), sent_ids.size());
    EXPECT_EQ(conn->unmatched_responses(), 0);

    // The server saw the same ids, also increasing.
    long server_last = 0;
    for (auto const& m : mock.received()) {
        EXPECT_GT(m["id"].get<long>(), server_last);
        server_last = m["id"].get<long>();
    }
}

TEST(CdpFraming, EventsNeverSatisfyCommands)
{
    testsupport::MockCdpServer mock;
    auto conn = CdpConnection::connect(mock.ws_url());
    std::atomic<int> ticks{0};
    conn->subscribe([&](const CdpEvent& e) {
        if (e.method == "Mock.tick")
            ++ticks;
    });
    // Odd ids are answered late, after their tick event has already arrived.
    auto r = conn->send("Echo.slow", {{"n", 1}});
    EXPECT_EQ(r["method"], "Echo.slow");
    conn->send("Echo.fast");
    EXPECT_EQ(ticks, 2);
}

TEST(CdpFraming, StrayResponseCounted)
{
    testsupport::MockCdpServer mock;
    auto conn = CdpConnection::connect(mock.ws_url());
    conn->send("Mock.strayId");
    conn->send("Echo.after");
    EXPECT_EQ(conn->unmatched_responses(), 1);
}

TEST(CdpFraming, ErrorReply)
{
    testsupport::MockCdpServer mock;
    auto conn = CdpConnection::connect(mock.ws_url());
    try {
        conn->send("Mock.fail");
        FAIL() << "expected CdpCommandError";
    } catch (const CdpCommandError& e) {
        EXPECT_EQ(e.method(), "Mock.fail");
        EXPECT_EQ(e.code(), -32000);
    }
    EXPECT_NO_THROW(conn->send("Echo.still_alive"));
}

TEST(CdpFraming, SilentTimesOut)
{
    testsupport::MockCdpServer mock;
    auto conn = CdpConnection::connect(mock.ws_url());
    EXPECT_THROW(conn->send("Mock.silent", json::object(), {}, 200ms), CdpTimeout);
    EXPECT_NO_THROW(conn->send("Echo.after_timeout"));
}

TEST(CdpFraming, ServerCloseFailsCommands)
{
    testsupport::MockCdpServer mock;
    auto conn = CdpConnection::connect(mock.ws_url());
    EXPECT_THROW(conn->send("Mock.close", json::object(), {}, 5s), ConnectionClosed);
    EXPECT_FALSE(conn->is_open());
    EXPECT_THROW(conn->send("Echo.dead"), ConnectionClosed);
}

TEST(CdpFraming, SessionIdRouted)
{
    testsupport::MockCdpServer mock;
    auto conn = CdpConnection::connect(mock.ws_url());
    conn->send("Echo.scoped", json::object(), "S-T1");
    auto got = mock.received();
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0]["sessionId"], "S-T1");
}

TEST(CdpConnect, UnreachableEndpoint)
{
    EXPECT_THROW(CdpConnection::connect("ws://127.0.0.1:1/devtools/browser/x", 2s), ConnectError);
    BrowserEnvironmentConfig cfg;
    cfg.mode = BrowserMode::remote_endpoint;
    cfg.endpoint = "ws://127.0.0.1:1/devtools/browser/x";
    cfg.handshake_timeout = 2s;
    auto started = std::chrono::steady_clock::now();
    EXPECT_THROW(CdpPage::open(cfg), DriverError);
    EXPECT_LT(std::chrono::steady_clock::now() - started, 10s);
}

TEST(CdpConnect, AttachHandshakeAgainstMock)
{
    testsupport::MockCdpServer mock;
    BrowserEnvironmentConfig cfg;
    cfg.mode = BrowserMode::attach_cdp;
    cfg.endpoint = mock.http_url();
    auto page = CdpPage::open(cfg);
    EXPECT_EQ(page->target_session(), "S-T1");

    bool attached = false;
    std::set<std::string> scoped;
    for (auto const& m : mock.received()) {
        if (m["method"] == "Target.attachToTarget") {
            attached = true;
            EXPECT_EQ(m["params"]["targetId"], "T1");
            EXPECT_EQ(m["params"]["flatten"], true);
        }
        if (m.contains("sessionId"))
            scoped.insert(m["method"].get<std::string>());
    }
    EXPECT_TRUE(attached);
    EXPECT_TRUE(scoped.count("Page.enable"));
    EXPECT_TRUE(scoped.count("DOM.enable"));
    EXPECT_TRUE(scoped.count("Runtime.enable"));
}

TEST(CdpConnect, ResolveWsEndpoint)
{
    testsupport::MockCdpServer mock;
    EXPECT_EQ(resolve_ws_endpoint(mock.http_url(), 2s), mock.ws_url());
    EXPECT_EQ(resolve_ws_endpoint("ws://x/y", 2s), "ws://x/y");
}
