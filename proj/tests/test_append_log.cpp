#include <doctest.h>

#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "psyphy/append_log.hpp"
#include "psyphy/error.hpp"
#include "support.hpp"

using namespace psyphy;

TEST_CASE("appends are durable and counted") {
    TempDir dir;
    {
        AppendLog log(dir / "a.jsonl");
        CHECK(log.append("{\"i\":0}") == 0);
        CHECK(log.append("{\"i\":1}") == 1);
        CHECK(log.record_count() == 2);
    }
    AppendLog again(dir / "a.jsonl");
    CHECK(again.record_count() == 2);
    CHECK(again.append("{\"i\":2}") == 2);
    const auto lines = again.read_lines();
    REQUIRE(lines.size() == 3);
    CHECK(lines[2] == "{\"i\":2}");
    CHECK(again.read_all() == "{\"i\":0}\n{\"i\":1}\n{\"i\":2}\n");
}

TEST_CASE("a torn trailing line is dropped on open") {
    TempDir dir;
    {
        std::ofstream f(dir / "t.jsonl");
        f << "{\"i\":0}\n{\"i\":1}\n{\"i\":";
    }
    AppendLog log(dir / "t.jsonl");
    CHECK(log.record_count() == 2);
    log.append("{\"i\":2}");
    CHECK(log.read_all() == "{\"i\":0}\n{\"i\":1}\n{\"i\":2}\n");
}

TEST_CASE("newlines inside a record are refused") {
    TempDir dir;
    AppendLog log(dir / "n.jsonl");
    CHECK_THROWS_AS(log.append("a\nb"), Error);
    CHECK(log.record_count() == 0);
}

TEST_CASE("index file tracks stride boundaries") {
    TempDir dir;
    AppendLog log(dir / "x.jsonl", 4);
    for (int i = 0; i < 9; ++i) log.append("{\"i\":" + std::to_string(i) + "}");
    std::ifstream in(dir.path() / "x.jsonl.idx");
    REQUIRE(in);
    nlohmann::json idx;
    in >> idx;
    CHECK(idx.at("records") == 8);
}

TEST_CASE("concurrent appends never interleave") {
    TempDir dir;
    AppendLog log(dir / "c.jsonl");
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&log, t] {
            for (int i = 0; i < 50; ++i) log.append(nlohmann::json{{"t", t}, {"i", i}}.dump());
        });
    }
    for (auto& th : threads) th.join();
    const auto lines = log.read_lines();
    CHECK(lines.size() == 200);
    for (const auto& l : lines) CHECK_NOTHROW(nlohmann::json::parse(l));
}
