#include "octofunc/schema.hpp"

#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "octofunc/error.hpp"

namespace octofunc {

namespace {

bool is_identifier(std::string_view s) {
    if (s.empty()) return false;
    auto head = static_cast<unsigned char>(s[0]);
    if (!std::isalpha(head) && s[0] != '_') return false;
    for (char c : s) {
        auto uc = static_cast<unsigned char>(c);
        if (!std::isalnum(uc) && c != '_') return false;
    }
    return true;
}

std::string trim(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(pos));
            break;
        }
        lines.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

// "- name (kind): text" docstring item
struct DocItem {
    std::string name;
    std::string annotation;
    std::string text;
};

std::vector<DocItem> parse_item_list(const std::vector<std::string>& lines, size_t begin,
                                     size_t end) {
    static const std::regex item_re(R"(^\s*-\s*([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*:\s*(.*)$)");
    std::vector<DocItem> items;
    for (size_t i = begin; i < end; ++i) {
        std::smatch m;
        if (std::regex_match(lines[i], m, item_re)) {
            items.push_back({m[1].str(), trim(m[2].str()), trim(m[3].str())});
        } else if (!items.empty() && !trim(lines[i]).empty()) {
            items.back().text += " " + trim(lines[i]);  // wrapped continuation line
        }
    }
    return items;
}

std::vector<std::string> extract_enum_values(const std::string& description) {
    static const std::regex phrase_re(R"(must choose (one )?from\s*((?:\s*\"[^\"]*\"\s*,?)+))");
    std::smatch m;
    if (!std::regex_search(description, m, phrase_re)) return {};
    static const std::regex value_re("\"([^\"]*)\"");
    std::vector<std::string> values;
    std::string list = m[2].str();
    for (auto it = std::sregex_iterator(list.begin(), list.end(), value_re);
         it != std::sregex_iterator(); ++it)
        values.push_back((*it)[1].str());
    return values;
}

}  // namespace

const char* param_kind_name(ParamKind k) {
    switch (k) {
        case ParamKind::string_kind: return "string";
        case ParamKind::integer_kind: return "integer";
        case ParamKind::enum_kind: return "enum";
    }
    return "string";
}

ParamKind param_kind_from_name(std::string_view s) {
    if (s == "string") return ParamKind::string_kind;
    if (s == "integer") return ParamKind::integer_kind;
    if (s == "enum") return ParamKind::enum_kind;
    throw Error(Errc::invalid_config, "unknown param kind '" + std::string(s) + "'");
}

FunctionSchema parse_declaration(std::string_view source) {
    auto lines = split_lines(source);

    // signature line
    static const std::regex sig_re(R"(^\s*def\s+([A-Za-z_][A-Za-z0-9_]*)\s*\(([^)]*)\)\s*:\s*$)");
    size_t sig_line = lines.size();
    std::smatch sig;
    for (size_t i = 0; i < lines.size(); ++i) {
        if (std::regex_match(lines[i], sig, sig_re)) {
            sig_line = i;
            break;
        }
    }
    if (sig_line == lines.size())
        throw Error(Errc::malformed_declaration, "no `def name(...):` signature line");

    FunctionSchema schema;
    schema.name = sig[1].str();

    std::vector<std::string> sig_params;
    std::string plist = sig[2].str();
    std::stringstream ss(plist);
    std::string piece;
    while (std::getline(ss, piece, ',')) {
        std::string p = trim(piece);
        if (p.empty()) continue;
        if (!is_identifier(p))
            throw Error(Errc::malformed_declaration, "bad parameter name '" + p + "'");
        sig_params.push_back(p);
    }

    // docstring between the first pair of triple quotes after the signature
    size_t doc_begin = lines.size(), doc_end = lines.size();
    for (size_t i = sig_line + 1; i < lines.size(); ++i) {
        if (trim(lines[i]).rfind("\"\"\"", 0) == 0) {
            doc_begin = i;
            break;
        }
    }
    if (doc_begin == lines.size())
        throw Error(Errc::malformed_declaration, schema.name + ": missing docstring");
    for (size_t i = doc_begin + 1; i < lines.size(); ++i) {
        if (trim(lines[i]).rfind("\"\"\"", 0) == 0) {
            doc_end = i;
            break;
        }
    }
    if (doc_end == lines.size())
        throw Error(Errc::malformed_declaration, schema.name + ": unterminated docstring");

    size_t params_line = doc_end, returns_line = doc_end;
    for (size_t i = doc_begin + 1; i < doc_end; ++i) {
        std::string t = trim(lines[i]);
        if (t == "Parameters:" && params_line == doc_end) params_line = i;
        if (t == "Returns:" && returns_line == doc_end) returns_line = i;
    }

    std::string desc;
    for (size_t i = doc_begin + 1; i < std::min(params_line, returns_line); ++i) {
        std::string t = trim(lines[i]);
        if (t.empty()) continue;
        if (!desc.empty()) desc += " ";
        desc += t;
    }
    schema.description = desc;

    if (returns_line < doc_end) {
        std::string ret;
        for (size_t i = returns_line + 1; i < doc_end; ++i) {
            std::string t = trim(lines[i]);
            if (t.empty()) continue;
            if (t.rfind("- ", 0) == 0) t = trim(t.substr(2));
            if (!ret.empty()) ret += " ";
            ret += t;
        }
        schema.returns_description = ret;
    }

    if (!sig_params.empty() && params_line == doc_end)
        throw Error(Errc::malformed_declaration, schema.name + ": no Parameters section");

    std::vector<DocItem> items;
    if (params_line < doc_end)
        items = parse_item_list(lines, params_line + 1,
                                returns_line > params_line ? returns_line : doc_end);

    for (const std::string& pname : sig_params) {
        const DocItem* item = nullptr;
        for (const auto& it : items)
            if (it.name == pname) {
                item = &it;
                break;
            }
        if (!item)
            throw Error(Errc::malformed_declaration,
                        schema.name + ": parameter '" + pname + "' not documented");

        ParamSpec p;
        p.name = pname;
        p.description = item->text;
        if (item->annotation == "int") {
            p.kind = ParamKind::integer_kind;
        } else if (item->annotation == "str") {
            auto values = extract_enum_values(item->text);
            if (!values.empty()) {
                for (size_t i = 0; i < values.size(); ++i)
                    for (size_t j = i + 1; j < values.size(); ++j)
                        if (values[i] == values[j])
                            throw Error(Errc::malformed_declaration,
                                        schema.name + ": duplicate enum value '" + values[i] + "'");
                p.kind = ParamKind::enum_kind;
                p.enum_values = std::move(values);
            } else {
                p.kind = ParamKind::string_kind;
            }
        } else {
            throw Error(Errc::unsupported_param_kind,
                        schema.name + ": parameter '" + pname + "' annotated (" +
                            item->annotation + ")");
        }
        schema.params.push_back(std::move(p));
    }
    return schema;
}

std::vector<FunctionSchema> parse_declarations(std::string_view text) {
    auto lines = split_lines(text);
    std::vector<size_t> starts;
    for (size_t i = 0; i < lines.size(); ++i)
        if (lines[i].rfind("def ", 0) == 0) starts.push_back(i);
    if (starts.empty())
        throw Error(Errc::malformed_declaration, "no declarations found");

    std::vector<FunctionSchema> schemas;
    for (size_t s = 0; s < starts.size(); ++s) {
        size_t lo = starts[s];
        size_t hi = (s + 1 < starts.size()) ? starts[s + 1] : lines.size();
        std::string chunk;
        for (size_t i = lo; i < hi; ++i) {
            chunk += lines[i];
            chunk += '\n';
        }
        schemas.push_back(parse_declaration(chunk));
    }
    return schemas;
}

TokenAssignment Registry::register_schema(FunctionSchema schema) {
    if (frozen_) throw Error(Errc::registry_frozen, "cannot register after freeze");
    if (!is_identifier(schema.name))
        throw Error(Errc::malformed_declaration, "bad function name '" + schema.name + "'");
    for (const auto& s : schemas_)
        if (s.name == schema.name)
            throw Error(Errc::duplicate_name, "'" + schema.name + "' already registered");
    for (size_t i = 0; i < schema.params.size(); ++i)
        for (size_t j = i + 1; j < schema.params.size(); ++j)
            if (schema.params[i].name == schema.params[j].name)
                throw Error(Errc::malformed_declaration,
                            schema.name + ": duplicate parameter '" + schema.params[i].name + "'");

    TokenAssignment a;
    a.schema_name = schema.name;
    a.token_index = static_cast<int>(schemas_.size());
    schemas_.push_back(std::move(schema));
    assignments_.push_back(a);
    return a;
}

void Registry::freeze(const Vocabulary& vocab) {
    if (frozen_) throw Error(Errc::registry_frozen, "already frozen");
    if (!vocab.extended())
        throw Error(Errc::vocabulary_not_extended, "freeze requires an extended vocabulary");
    if (vocab.n_functional() < static_cast<int>(schemas_.size()))
        throw Error(Errc::invalid_config,
                    "vocabulary has " + std::to_string(vocab.n_functional()) +
                        " functional tokens for " + std::to_string(schemas_.size()) + " schemas");
    for (auto& a : assignments_) a.token_id = vocab.functional_id(a.token_index);
    frozen_ = true;
}

const FunctionSchema& Registry::lookup(int token_index) const {
    if (!frozen_) throw Error(Errc::registry_not_frozen, "lookup before freeze");
    if (token_index < 0 || token_index >= static_cast<int>(schemas_.size()))
        throw Error(Errc::unknown_function, "token index " + std::to_string(token_index));
    return schemas_[static_cast<size_t>(token_index)];
}

const FunctionSchema& Registry::lookup(std::string_view name) const {
    if (!frozen_) throw Error(Errc::registry_not_frozen, "lookup before freeze");
    for (const auto& s : schemas_)
        if (s.name == name) return s;
    throw Error(Errc::unknown_function, "'" + std::string(name) + "'");
}

bool Registry::contains(std::string_view name) const {
    for (const auto& s : schemas_)
        if (s.name == name) return true;
    return false;
}

int Registry::token_index_of(std::string_view name) const {
    if (!frozen_) throw Error(Errc::registry_not_frozen, "lookup before freeze");
    for (const auto& a : assignments_)
        if (a.schema_name == name) return a.token_index;
    throw Error(Errc::unknown_function, "'" + std::string(name) + "'");
}

void save_manifest(const std::filesystem::path& path, const std::vector<FunctionSchema>& schemas) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::io_failure, "cannot write " + path.string());
    for (const auto& s : schemas) {
        nlohmann::ordered_json j;
        j["name"] = s.name;
        j["description"] = s.description;
        j["params"] = nlohmann::ordered_json::array();
        for (const auto& p : s.params) {
            nlohmann::ordered_json pj;
            pj["name"] = p.name;
            pj["kind"] = param_kind_name(p.kind);
            if (p.kind == ParamKind::enum_kind) pj["enum_values"] = p.enum_values;
            pj["description"] = p.description;
            j["params"].push_back(pj);
        }
        j["returns"] = s.returns_description;
        out << j.dump() << "\n";
    }
}

std::vector<FunctionSchema> load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io_failure, "cannot read " + path.string());
    std::vector<FunctionSchema> schemas;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::io_failure,
                        path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        FunctionSchema s;
        s.name = j.at("name").get<std::string>();
        s.description = j.value("description", "");
        s.returns_description = j.value("returns", "");
        for (const auto& pj : j.at("params")) {
            ParamSpec p;
            p.name = pj.at("name").get<std::string>();
            p.kind = param_kind_from_name(pj.at("kind").get<std::string>());
            if (p.kind == ParamKind::enum_kind)
                p.enum_values = pj.at("enum_values").get<std::vector<std::string>>();
            p.description = pj.value("description", "");
            s.params.push_back(std::move(p));
        }
        schemas.push_back(std::move(s));
    }
    return schemas;
}

Registry build_registry(const std::vector<FunctionSchema>& schemas, const Vocabulary& vocab) {
    Registry r;
    for (const auto& s : schemas) r.register_schema(s);
    r.freeze(vocab);
    return r;
}

std::string escape_string_literal(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        if (c == '\'' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

std::string render_call(const FunctionalCall& call, RenderStyle style) {
    std::string out;
    if (style == RenderStyle::name_form) {
        out = call.schema ? call.schema->name : "";
    } else {
        out = "<nexa_" + std::to_string(call.token_index) + ">";
    }
    out += "(";
    for (size_t i = 0; i < call.args.size(); ++i) {
        if (i > 0) out += ", ";
        if (std::holds_alternative<std::string>(call.args[i])) {
            out += "'";
            out += escape_string_literal(std::get<std::string>(call.args[i]));
            out += "'";
        } else {
            out += std::to_string(std::get<int64_t>(call.args[i]));
        }
    }
    out += ")<nexa_end>";
    return out;
}

}  // namespace octofunc
