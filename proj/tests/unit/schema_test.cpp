#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "octofunc/error.hpp"
#include "octofunc/schema.hpp"
#include "octofunc/tokenizer.hpp"

using namespace octofunc;

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<FunctionSchema> demo_schemas() {
    static std::vector<FunctionSchema> schemas =
        parse_declarations(read_file(std::filesystem::path(OCTOFUNC_DATA_DIR) / "demo_functions.txt"));
    return schemas;
}

Registry demo_registry() {
    Vocabulary v = extend_with_functional_tokens(Vocabulary::base(), 10);
    return build_registry(demo_schemas(), v);
}

}  // namespace

TEST_CASE("importer yields the ten demo schemas in declaration order") {
    auto schemas = demo_schemas();
    REQUIRE(schemas.size() == 10);
    const char* expected[] = {"send_text_message", "send_email",      "google_search",
                              "amazon_purchase",   "smart_recycle",   "lost_and_found",
                              "interior_design",   "instacart_shopping", "doordash_order",
                              "animal_care"};
    (void)expected;
    for (int i = 0; i < 10; ++i) CHECK(schemas[static_cast<size_t>(i)].name == expected[i]);
}

TEST_CASE("enum parameters reproduce the printed value lists") {
    auto schemas = demo_schemas();
    const FunctionSchema& recycle = schemas[4];
    REQUIRE(recycle.params.size() == 2);
    CHECK(recycle.params[0].name == "item_name");
    CHECK(recycle.params[0].kind == ParamKind::string_kind);
    CHECK(recycle.params[1].kind == ParamKind::enum_kind);
    CHECK(recycle.params[1].enum_values ==
          std::vector<std::string>{"electronics", "plastic", "paper"});

    const FunctionSchema& care = schemas[9];
    REQUIRE(care.params.size() == 2);
    CHECK(care.params[0].name == "animal_type");
    CHECK(care.params[0].kind == ParamKind::string_kind);
    CHECK(care.params[1].enum_values ==
          std::vector<std::string>{"feeding", "grooming", "exercise"});

    const FunctionSchema& insta = schemas[7];
    CHECK(insta.params[0].kind == ParamKind::string_kind);
    CHECK(insta.params[1].kind == ParamKind::integer_kind);
}

TEST_CASE("declaration parser edge cases") {
    FunctionSchema empty = parse_declaration("def ping():\n    \"\"\"\n    Check.\n    \"\"\"\n");
    CHECK(empty.name == "ping");
    CHECK(empty.params.empty());

    CHECK_THROWS_AS((void)parse_declaration("not a declaration"), Error);

    // unsupported annotation
    std::string bad =
        "def f(x):\n    \"\"\"\n    Doc.\n\n    Parameters:\n    - x (float): number.\n\n"
        "    Returns:\n    - str: out.\n    \"\"\"\n";
    try {
        (void)parse_declaration(bad);
        FAIL("expected UnsupportedParamKind");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::unsupported_param_kind);
    }

    // missing Parameters section while the signature declares one
    std::string missing = "def f(x):\n    \"\"\"\n    Doc.\n    \"\"\"\n";
    try {
        (void)parse_declaration(missing);
        FAIL("expected MalformedDeclaration");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::malformed_declaration);
    }
}

TEST_CASE("registration assigns dense indices in order") {
    Registry r = demo_registry();
    CHECK(r.size() == 10);
    CHECK(r.frozen());
    CHECK(r.assignments()[0].schema_name == "send_text_message");
    CHECK(r.assignments()[0].token_index == 0);
    CHECK(r.assignments()[0].token_id == 261);
    CHECK(r.assignments()[9].schema_name == "animal_care");
    CHECK(r.assignments()[9].token_id == 270);

    CHECK(r.lookup(4).name == "smart_recycle");
    CHECK(r.token_index_of("instacart_shopping") == 7);
    CHECK_THROWS_AS((void)r.lookup(99), Error);
    CHECK_THROWS_AS((void)r.lookup("nope"), Error);
}

TEST_CASE("duplicate and post-freeze registration rejected") {
    Registry r;
    FunctionSchema s;
    s.name = "send_email";
    r.register_schema(s);
    try {
        r.register_schema(s);
        FAIL("expected DuplicateName");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_name);
    }
    Vocabulary v = extend_with_functional_tokens(Vocabulary::base(), 10);
    r.freeze(v);
    FunctionSchema s2;
    s2.name = "later";
    try {
        r.register_schema(s2);
        FAIL("expected RegistryFrozen");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::registry_frozen);
    }
}

TEST_CASE("render_call forms") {
    Registry r = demo_registry();
    FunctionalCall call;
    call.token_index = 7;
    call.schema = &r.lookup(7);
    call.args = {ArgValue{std::string("pineapple")}, ArgValue{int64_t{2}}};

    CHECK(render_call(call, RenderStyle::name_form) == "instacart_shopping('pineapple', 2)<nexa_end>");
    CHECK(render_call(call, RenderStyle::token_form) == "<nexa_7>('pineapple', 2)<nexa_end>");

    FunctionalCall esc;
    esc.token_index = 2;
    esc.schema = &r.lookup(2);
    esc.args = {ArgValue{std::string("it's a \\ test")}};
    CHECK(render_call(esc, RenderStyle::name_form) ==
          "google_search('it\\'s a \\\\ test')<nexa_end>");
}

TEST_CASE("manifest round trip and rebuild stability") {
    auto schemas = demo_schemas();
    auto tmp = std::filesystem::temp_directory_path() / "octofunc_manifest_test.jsonl";
    save_manifest(tmp, schemas);
    auto loaded = load_manifest(tmp);
    REQUIRE(loaded.size() == schemas.size());
    for (size_t i = 0; i < schemas.size(); ++i) {
        CHECK(loaded[i].name == schemas[i].name);
        REQUIRE(loaded[i].params.size() == schemas[i].params.size());
        for (size_t j = 0; j < schemas[i].params.size(); ++j) {
            CHECK(loaded[i].params[j].name == schemas[i].params[j].name);
            CHECK(loaded[i].params[j].kind == schemas[i].params[j].kind);
            CHECK(loaded[i].params[j].enum_values == schemas[i].params[j].enum_values);
        }
    }
    // identical assignments on rebuild
    Vocabulary v = extend_with_functional_tokens(Vocabulary::base(), 10);
    Registry a = build_registry(schemas, v);
    Registry b = build_registry(loaded, v);
    for (size_t i = 0; i < a.assignments().size(); ++i) {
        CHECK(a.assignments()[i].schema_name == b.assignments()[i].schema_name);
        CHECK(a.assignments()[i].token_id == b.assignments()[i].token_id);
    }
    std::filesystem::remove(tmp);
}
