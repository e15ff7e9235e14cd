#pragma once

// Shared test helpers: random valid call generation and a reference mask
// walker used by both the unit and acceptance suites.

#include <string>
#include <vector>

#include "octofunc/rng.hpp"
#include "octofunc/schema.hpp"
#include "octofunc/tokenizer.hpp"

namespace octofunc::testsupport {

// String content for random call arguments: ASCII with quotes/backslashes plus
// CJK, never containing a full special-token surface (the call encoding
// reserves those).
inline std::string random_arg_string(Rng& rng, int max_chars) {
    static const char* cjk[] = {"同", "济", "大", "学", "回", "收", "这", "个", "水", "瓶"};
    std::string s;
    int n = rng.uniform_int(0, max_chars);
    for (int i = 0; i < n; ++i) {
        switch (rng.uniform_int(0, 9)) {
            case 0: s += '\''; break;
            case 1: s += '\\'; break;
            case 2: s += cjk[rng.uniform_int(0, 9)]; break;
            case 3: s += '<'; break;
            default: s += static_cast<char>(rng.uniform_int(0x20, 0x7E)); break;
        }
    }
    for (const char* surf : {"<nexa_", "<pad>", "<bos>", "<eos>", "<img>"})
        while (s.find(surf) != std::string::npos) s.erase(s.find(surf), 1);
    return s;
}

inline FunctionalCall random_valid_call(Rng& rng, const Registry& registry) {
    int idx = rng.uniform_int(0, static_cast<int>(registry.size()) - 1);
    FunctionalCall call;
    call.token_index = idx;
    call.schema = &registry.lookup(idx);
    for (const ParamSpec& p : call.schema->params) {
        switch (p.kind) {
            case ParamKind::string_kind:
                call.args.emplace_back(random_arg_string(rng, 24));
                break;
            case ParamKind::enum_kind:
                call.args.emplace_back(
                    p.enum_values[static_cast<size_t>(rng.uniform_int(
                        0, static_cast<int>(p.enum_values.size()) - 1))]);
                break;
            case ParamKind::integer_kind: {
                if (rng.uniform_int(0, 3) == 0) {
                    // stress the 64-bit boundary region
                    uint64_t m = rng.next_u64() >> rng.uniform_int(0, 40);
                    bool neg = rng.uniform_int(0, 1) == 1;
                    int64_t v = neg ? static_cast<int64_t>(0ull - (m & 0x7FFFFFFFFFFFFFFFull))
                                    : static_cast<int64_t>(m & 0x7FFFFFFFFFFFFFFFull);
                    call.args.emplace_back(v);
                } else {
                    call.args.emplace_back(static_cast<int64_t>(rng.uniform_int(-999, 999)));
                }
                break;
            }
        }
    }
    return call;
}

// Registry with awkward shapes: zero params, many params, enum values sharing
// prefixes and containing quote/backslash/CJK bytes.
inline std::vector<FunctionSchema> stress_schemas() {
    std::vector<FunctionSchema> out;
    FunctionSchema none;
    none.name = "noop";
    out.push_back(none);

    FunctionSchema tricky;
    tricky.name = "tricky_enum";
    ParamSpec e;
    e.name = "mode";
    e.kind = ParamKind::enum_kind;
    e.enum_values = {"plastic", "plas", "plastic bottle", "p", "回收", "回收站", "a'b", "a\\b", ""};
    tricky.params.push_back(e);
    ParamSpec n;
    n.name = "count";
    n.kind = ParamKind::integer_kind;
    tricky.params.push_back(n);
    out.push_back(tricky);

    FunctionSchema wide;
    wide.name = "wide_call";
    for (int i = 0; i < 5; ++i) {
        ParamSpec p;
        p.name = "p" + std::to_string(i);
        p.kind = i % 2 == 0 ? ParamKind::string_kind : ParamKind::integer_kind;
        wide.params.push_back(p);
    }
    out.push_back(wide);
    return out;
}

}  // namespace octofunc::testsupport
