#include <doctest.h>

#include <fstream>

#include "trustbench/errors.hpp"
#include "trustbench/practices.hpp"
#include "trustbench/prompting.hpp"
#include "trustbench/sha256.hpp"

using namespace trustbench;

namespace {

TemplateSet templates() { return TemplateSet::load(TB_SOURCE_DIR "/data/templates"); }

Catalog catalog() { return load_catalog(TB_SOURCE_DIR "/data/catalog/input_validation.cat"); }

FunctionRecord record(const std::string& id, const std::string& svc, const std::string& op,
                      const std::string& src, VariantKind kind = VariantKind::Secure) {
    FunctionRecord rec;
    rec.function_id = id;
    rec.service_id = svc;
    rec.operation_name = op;
    rec.variant = kind;
    rec.source_text = src;
    return rec;
}

}  // namespace

TEST_CASE("template set loads with version and required entries") {
    TemplateSet set = templates();
    CHECK(set.version() == "tb-templates-1.0.0");
    CHECK_NOTHROW(set.text("baseline"));
    CHECK_THROWS_AS(set.text("nonexistent"), ValidationError);
}

TEST_CASE("rendering is deterministic and hash-addressed") {
    PromptRenderer renderer(templates());
    Catalog cat = catalog();
    FunctionRecord f = record("s.op.Vx0", "s", "op", "int op() { return 1; }");

    RenderedPrompt a = renderer.render_baseline(f, cat.at(3));
    RenderedPrompt b = renderer.render_baseline(f, cat.at(3));
    CHECK(a.text == b.text);
    CHECK(a.content_hash == b.content_hash);
    CHECK(a.content_hash == sha256_hex(a.text));
    CHECK(a.practice_id == 3);
    CHECK(a.text.find("tb-templates-1.0.0") != std::string::npos);
    CHECK(a.text.find(f.source_text) != std::string::npos);
    CHECK(a.text.find(kFenceSentinel) != std::string::npos);

    // Different practice, different prompt.
    RenderedPrompt c = renderer.render_baseline(f, cat.at(4));
    CHECK(c.content_hash != a.content_hash);
}

TEST_CASE("cwe block is byte-identical across functions for a fixed practice") {
    PromptRenderer renderer(templates());
    Catalog cat = catalog();
    FunctionRecord f1 = record("s.a.Vx0", "s", "a", "int a() { return 1; }");
    FunctionRecord f2 = record("s.b.VxA", "s", "b", "int b() { return 2; }",
                               VariantKind::FullyVulnerable);

    std::string block = renderer.cwe_block(cat.at(5));
    CHECK(block == renderer.cwe_block(cat.at(5)));
    RenderedPrompt p1 = renderer.render_cwe_examples(f1, cat.at(5));
    RenderedPrompt p2 = renderer.render_cwe_examples(f2, cat.at(5));
    CHECK(p1.text.find(block) != std::string::npos);
    CHECK(p2.text.find(block) != std::string::npos);
    CHECK(p1.text.substr(p1.text.size() - block.size()) ==
          p2.text.substr(p2.text.size() - block.size()));
}

TEST_CASE("fence sentinel escaping round-trips") {
    std::string tricky = "line1\n" + kFenceSentinel + "\nline3";
    std::string escaped = escape_fenced(tricky);
    CHECK(escaped.find(kFenceSentinel + kFenceSentinel) != std::string::npos);
    CHECK(unescape_fenced(escaped) == tricky);
    CHECK(escape_fenced("no sentinel here") == "no sentinel here");
}

TEST_CASE("lexical resolver finds call sites in source order") {
    std::vector<FunctionRecord> recs{
        record("s.main.Vx0", "s", "main", "void run() { foo(bar(x)); foo(y); }"),
        record("s.foo.Vx0", "s", "foo", "int foo() { return 1; }"),
        record("s.bar.Vx0", "s", "bar", "int bar() { return 2; }"),
    };
    Corpus corpus(recs);
    ResolvedCalls calls = resolve_calls(corpus.at("s.main.Vx0"), corpus);
    CHECK(calls.callees == std::vector<std::string>{"s.foo.Vx0", "s.bar.Vx0"});
}

TEST_CASE("resolver ignores comments, strings, declarations and keywords") {
    std::vector<FunctionRecord> recs{
        record("s.main.Vx0", "s", "main",
               "int run() {\n"
               "  // foo(1) in a comment\n"
               "  String s = \"bar(2)\";\n"
               "  int foo = 3;        /* declaration, not a call */\n"
               "  if (ready) { return bar(foo); }\n"
               "  new bar();\n"
               "}\n"),
        record("s.foo.Vx0", "s", "foo", "int foo() { return 1; }"),
        record("s.bar.Vx0", "s", "bar", "int bar() { return 2; }"),
    };
    Corpus corpus(recs);
    ResolvedCalls calls = resolve_calls(corpus.at("s.main.Vx0"), corpus);
    CHECK(calls.callees == std::vector<std::string>{"s.bar.Vx0"});
}

TEST_CASE("resolver prefers same service and variant") {
    std::vector<FunctionRecord> recs{
        record("a.helper.Vx0", "a", "helper", "int helper() { return 0; }"),
        record("a.helper.VxA", "a", "helper", "int helper() { return 1; }",
               VariantKind::FullyVulnerable),
        record("b.helper.Vx0", "b", "helper", "int helper() { return 2; }"),
        record("a.main.VxA", "a", "main", "void run() { helper(); }",
               VariantKind::FullyVulnerable),
        record("c.main.Vx0", "c", "main", "void run() { helper(); }"),
    };
    Corpus corpus(recs);
    // Same service + same variant wins.
    CHECK(resolve_calls(corpus.at("a.main.VxA"), corpus).callees ==
          std::vector<std::string>{"a.helper.VxA"});
    // No same-service candidate: smallest function_id wins.
    CHECK(resolve_calls(corpus.at("c.main.Vx0"), corpus).callees ==
          std::vector<std::string>{"a.helper.Vx0"});
}

TEST_CASE("call context includes exactly the depth-1 callees by default") {
    std::vector<FunctionRecord> recs{
        record("s.a.Vx0", "s", "a", "void a() { b(); }"),
        record("s.b.Vx0", "s", "b", "void b() { c(); }"),
        record("s.c.Vx0", "s", "c", "void c() { }"),
    };
    Corpus corpus(recs);
    CallGraph graph = build_call_graph(corpus);
    Catalog cat = catalog();

    PromptRenderer depth1(templates(), 1);
    RenderedPrompt p1 = depth1.render_call_context(corpus.at("s.a.Vx0"), cat.at(1), graph, corpus);
    CHECK(p1.context_function_ids == std::vector<std::string>{"s.b.Vx0"});
    CHECK(p1.text.find("void b() { c(); }") != std::string::npos);
    CHECK(p1.text.find("void c() { }") == std::string::npos);

    PromptRenderer depth2(templates(), 2);
    RenderedPrompt p2 = depth2.render_call_context(corpus.at("s.a.Vx0"), cat.at(1), graph, corpus);
    CHECK(p2.context_function_ids == std::vector<std::string>{"s.b.Vx0", "s.c.Vx0"});

    // Leaf function: fixed empty-context marker keeps the prompt deterministic.
    RenderedPrompt leaf =
        depth1.render_call_context(corpus.at("s.c.Vx0"), cat.at(1), graph, corpus);
    CHECK(leaf.context_function_ids.empty());
}

TEST_CASE("declared callees override the lexical resolver") {
    FunctionRecord a = record("s.a.Vx0", "s", "a", "void a() { b(); }");
    a.declared_callees = {"s.c.Vx0"};
    std::vector<FunctionRecord> recs{a, record("s.b.Vx0", "s", "b", "void b() {}"),
                                     record("s.c.Vx0", "s", "c", "void c() {}")};
    Corpus corpus(recs);
    CallGraph graph = build_call_graph(corpus);
    CHECK(graph.edges.at("s.a.Vx0") == std::vector<std::string>{"s.c.Vx0"});
}

TEST_CASE("imported call graphs flag external ids with warnings") {
    std::vector<FunctionRecord> recs{record("s.a.Vx0", "s", "a", "void a() {}")};
    Corpus corpus(recs);
    auto path = std::filesystem::temp_directory_path() / "tb_callgraph.json";
    std::ofstream(path) << R"({"s.a.Vx0": ["lib.helper"], "outside": []})";
    CallGraph graph = import_call_graph(path, corpus);
    CHECK(graph.edges.at("s.a.Vx0") == std::vector<std::string>{"lib.helper"});
    CHECK(graph.external_ids.contains("lib.helper"));
    CHECK(graph.external_ids.contains("outside"));
    CHECK(graph.warnings.size() == 2);
}

TEST_CASE("score estimation prompt embeds the full verdict table in order") {
    PromptRenderer renderer(templates());
    FunctionRecord f = record("s.op.Vx0", "s", "op", "int op() { return 1; }");
    std::map<int, AdherenceLabel> table;
    for (int p = 1; p <= 16; ++p) table[p] = AdherenceLabel::Followed;
    table[7] = AdherenceLabel::NotFollowed;

    RenderedPrompt prompt = renderer.render_score_estimation(f, table);
    CHECK_FALSE(prompt.practice_id.has_value());
    CHECK(prompt.text.find("Practice 7: NotFollowed") != std::string::npos);
    std::size_t p1 = prompt.text.find("Practice 1:");
    std::size_t p16 = prompt.text.find("Practice 16:");
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p16 != std::string::npos);
    CHECK(p1 < p16);

    table.erase(16);
    CHECK_THROWS_AS(renderer.render_score_estimation(f, table), ValidationError);
}

TEST_CASE("token estimation and budget checks") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("abcd") == 1);
    CHECK(estimate_tokens("abcde") == 2);

    PromptRenderer renderer(templates());
    Catalog cat = catalog();
    FunctionRecord f = record("s.op.Vx0", "s", "op", std::string(4000, 'x'));
    RenderedPrompt prompt = renderer.render_baseline(f, cat.at(1));
    CHECK_NOTHROW(check_token_budget(prompt, 1'000'000));
    try {
        check_token_budget(prompt, 100);
        FAIL("expected BudgetExceededError");
    } catch (const BudgetExceededError& e) {
        CHECK(e.budget_tokens == 100);
        CHECK(e.measured_tokens == estimate_tokens(prompt.text));
    }
}

TEST_CASE("strategy tokens round-trip") {
    for (PromptStrategy s : {PromptStrategy::Baseline, PromptStrategy::CweAndBadExamples,
                             PromptStrategy::CallContext, PromptStrategy::RuleBased,
                             PromptStrategy::ScoreEstimation}) {
        CHECK(parse_strategy_token(strategy_token(s)) == s);
    }
    CHECK_FALSE(parse_strategy_token("zero-shot").has_value());
}
