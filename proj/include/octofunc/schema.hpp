#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "octofunc/tokenizer.hpp"

namespace octofunc {

enum class ParamKind { string_kind, integer_kind, enum_kind };

const char* param_kind_name(ParamKind k);
ParamKind param_kind_from_name(std::string_view s);

struct ParamSpec {
    std::string name;
    ParamKind kind = ParamKind::string_kind;
    std::vector<std::string> enum_values;  // non-empty iff kind == enum_kind
    std::string description;
};

struct FunctionSchema {
    std::string name;
    std::string description;
    std::vector<ParamSpec> params;  // positional, in declaration order
    std::string returns_description;
};

struct TokenAssignment {
    std::string schema_name;
    int token_index = -1;  // surface <nexa_{token_index}>
    int token_id = -1;     // vocabulary id, set on freeze
};

// Registry is mutable only during the single-threaded build phase; freeze()
// binds token ids against a vocabulary and makes it immutable.
class Registry {
public:
    TokenAssignment register_schema(FunctionSchema schema);
    void freeze(const Vocabulary& vocab);
    bool frozen() const { return frozen_; }

    const FunctionSchema& lookup(int token_index) const;
    const FunctionSchema& lookup(std::string_view name) const;
    bool contains(std::string_view name) const;
    int token_index_of(std::string_view name) const;

    size_t size() const { return schemas_.size(); }
    const std::vector<FunctionSchema>& schemas() const { return schemas_; }
    const std::vector<TokenAssignment>& assignments() const { return assignments_; }

private:
    std::vector<FunctionSchema> schemas_;
    std::vector<TokenAssignment> assignments_;
    bool frozen_ = false;
};

// Parse one docstring-style declaration: a `def name(a, b):` signature line
// followed by a docstring with a Parameters section. `(str)`/`(int)`
// annotations pick the kind; a description matching
//   must choose (one )?from "v1", "v2", ...
// makes the parameter an enum over exactly those values.
FunctionSchema parse_declaration(std::string_view source);

// Importer: a text file with one or more declarations.
std::vector<FunctionSchema> parse_declarations(std::string_view text);

// Canonical persistent format: JSON lines, one schema per line.
void save_manifest(const std::filesystem::path& path, const std::vector<FunctionSchema>& schemas);
std::vector<FunctionSchema> load_manifest(const std::filesystem::path& path);

// Register all schemas in order and freeze against the vocabulary.
Registry build_registry(const std::vector<FunctionSchema>& schemas, const Vocabulary& vocab);

// ---- Calls ----

using ArgValue = std::variant<std::string, int64_t>;

struct FunctionalCall {
    const FunctionSchema* schema = nullptr;  // resolved against a frozen registry
    int token_index = -1;
    std::vector<ArgValue> args;

    friend bool operator==(const FunctionalCall& a, const FunctionalCall& b) {
        return a.token_index == b.token_index && a.args == b.args;
    }
};

enum class RenderStyle { name_form, token_form };

// name form:  name('s', 2)<nexa_end>    token form:  <nexa_i>('s', 2)<nexa_end>
// Strings are single-quoted with \' and \\ escapes; integers bare; arguments
// separated by ", ".
std::string render_call(const FunctionalCall& call, RenderStyle style);

std::string escape_string_literal(std::string_view raw);

}  // namespace octofunc
