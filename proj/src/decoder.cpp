#include "octofunc/decoder.hpp"

#include <algorithm>
#include <cctype>

namespace octofunc {

namespace {

bool identifier_ok(std::string_view s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

std::string trim_copy(std::string_view s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

bool is_digit_byte(unsigned char b) { return b >= '0' && b <= '9'; }

}  // namespace

const char* violation_kind_name(ViolationKind k) {
    switch (k) {
        case ViolationKind::ArityMismatch: return "ArityMismatch";
        case ViolationKind::TypeMismatch: return "TypeMismatch";
        case ViolationKind::EnumViolation: return "EnumViolation";
        case ViolationKind::UnknownFunction: return "UnknownFunction";
    }
    return "Violation";
}

ValidationFailureError::ValidationFailureError(ValidationReport report)
    : Error(Errc::validation_failure,
            report.violations.empty()
                ? std::string("no violations")
                : std::string(violation_kind_name(report.violations[0].kind)) + ": " +
                      report.violations[0].detail +
                      (report.violations.size() > 1
                           ? " (+" + std::to_string(report.violations.size() - 1) + " more)"
                           : "")),
      report_(std::move(report)) {}

// ---- UTF-8 acceptor (well-formed byte sequences only, surrogates and
// overlong encodings rejected) ----

bool DecoderState::Utf8Acceptor::feed(unsigned char b) {
    if (remaining > 0) {
        if (b < next_min || b > next_max) return false;
        --remaining;
        next_min = 0x80;
        next_max = 0xBF;
        return true;
    }
    if (b < 0x80) return true;
    if (b >= 0xC2 && b <= 0xDF) { remaining = 1; return true; }
    if (b == 0xE0) { remaining = 2; next_min = 0xA0; return true; }
    if (b >= 0xE1 && b <= 0xEC) { remaining = 2; return true; }
    if (b == 0xED) { remaining = 2; next_max = 0x9F; return true; }
    if (b == 0xEE || b == 0xEF) { remaining = 2; return true; }
    if (b == 0xF0) { remaining = 3; next_min = 0x90; return true; }
    if (b >= 0xF1 && b <= 0xF3) { remaining = 3; return true; }
    if (b == 0xF4) { remaining = 3; next_max = 0x8F; return true; }
    return false;
}

bool DecoderState::Utf8Acceptor::accepts(unsigned char b) const {
    Utf8Acceptor probe = *this;
    return probe.feed(b);
}

// ---- DecoderState ----

DecoderState::DecoderState(const Vocabulary& vocab, const Registry* registry)
    : vocab_(&vocab), registry_(registry) {
    if (registry_ && !registry_->frozen())
        throw Error(Errc::registry_not_frozen, "strict decoding needs a frozen registry");
}

void DecoderState::start_named(std::string function_name) {
    if (phase_ != Phase::AwaitFunc || position_ != 0)
        throw std::logic_error("start_named on a running decoder");
    call_.function_name = std::move(function_name);
    if (registry_ && registry_->contains(call_.function_name))
        schema_ = &registry_->lookup(call_.function_name);
    phase_ = Phase::AwaitOpen;
}

const ParamSpec* DecoderState::current_param() const {
    if (!schema_) return nullptr;
    size_t i = call_.args.size();
    if (i >= schema_->params.size()) return nullptr;
    return &schema_->params[i];
}

bool DecoderState::digit_fits(int digit) const {
    uint64_t limit = int_negative_ ? (1ull << 63) : (1ull << 63) - 1;
    return int_magnitude_ <= (limit - static_cast<uint64_t>(digit)) / 10;
}

// Next legal content bytes for an enum-constrained string, given the bytes
// decoded so far. exact_now reports whether the buffer already equals a value.
bool DecoderState::enum_next_content_bytes(std::vector<bool>& bytes, bool& exact_now) const {
    const ParamSpec* p = current_param();
    if (!schema_ || !p || p->kind != ParamKind::enum_kind) return false;
    exact_now = false;
    size_t pos = buffer_.size();
    for (int idx : enum_candidates_) {
        const std::string& v = p->enum_values[static_cast<size_t>(idx)];
        if (v.size() == pos) exact_now = true;
        if (v.size() > pos) bytes[static_cast<unsigned char>(v[pos])] = true;
    }
    return true;
}

Event DecoderState::fail(const std::string& msg) {
    phase_ = Phase::Failed;
    error_ = msg;
    return Event{EventKind::ParseError, position_, msg};
}

bool DecoderState::arg_start_allowed(unsigned char b) const {
    bool is_string_start = b == '\'';
    bool is_int_start = is_digit_byte(b) || b == '-';
    if (!is_string_start && !is_int_start) return false;
    if (!schema_) return true;
    const ParamSpec* p = current_param();
    if (!p) return false;  // all declared arguments already supplied
    if (p->kind == ParamKind::integer_kind) return is_int_start;
    return is_string_start;
}

void DecoderState::begin_arg(unsigned char b) {
    if (b == '\'') {
        phase_ = Phase::InString;
        buffer_.clear();
        escape_pending_ = false;
        utf8_.reset();
        enum_candidates_.clear();
        const ParamSpec* p = current_param();
        if (schema_ && p && p->kind == ParamKind::enum_kind)
            for (size_t i = 0; i < p->enum_values.size(); ++i)
                enum_candidates_.push_back(static_cast<int>(i));
    } else {
        phase_ = Phase::InInt;
        int_negative_ = (b == '-');
        int_digits_ = int_negative_ ? 0 : 1;
        int_magnitude_ = int_negative_ ? 0 : static_cast<uint64_t>(b - '0');
    }
}

void DecoderState::finish_string() {
    call_.args.emplace_back(buffer_);
    buffer_.clear();
    phase_ = Phase::AwaitSeparator;
}

void DecoderState::finish_int() {
    uint64_t mag = int_magnitude_;
    int64_t v = int_negative_ ? static_cast<int64_t>(0ull - mag) : static_cast<int64_t>(mag);
    call_.args.emplace_back(v);
}

Event DecoderState::feed(int token_id) {
    if (phase_ == Phase::Done || phase_ == Phase::Failed)
        throw std::logic_error("feed on a finished decoder");
    if (token_id < 0 || token_id >= vocab_->size())
        throw Error(Errc::invalid_token_id, "id " + std::to_string(token_id));
    Event ev = transition(token_id);
    ++position_;
    return ev;
}

Event DecoderState::transition(int id) {
    const bool is_byte = id < Vocabulary::kByteRegion;
    const auto b = static_cast<unsigned char>(id);

    switch (phase_) {
        case Phase::AwaitFunc: {
            if (!vocab_->is_functional(id)) return fail("expected a functional token");
            int idx = vocab_->functional_index(id);
            if (registry_) {
                if (idx >= static_cast<int>(registry_->size()))
                    return fail("functional token without a registered schema");
                schema_ = &registry_->schemas()[static_cast<size_t>(idx)];
            }
            call_.token_index = idx;
            phase_ = Phase::AwaitOpen;
            return {};
        }

        case Phase::AwaitOpen: {
            if (!is_byte || b != '(') return fail("expected '('");
            phase_ = Phase::InArgs;
            can_close_ = schema_ ? schema_->params.empty() : true;
            space_allowed_ = false;
            return {};
        }

        case Phase::InArgs: {
            if (!is_byte) return fail("expected an argument");
            if (b == ' ' && space_allowed_) {
                space_allowed_ = false;
                return {};
            }
            if (b == ')' && can_close_) {
                phase_ = Phase::AwaitEnd;
                return {};
            }
            if (!arg_start_allowed(b)) return fail("expected an argument");
            begin_arg(b);
            return {};
        }

        case Phase::InString: {
            if (!is_byte) return fail("special token inside a string literal");
            std::vector<bool> enum_bytes(256, false);
            bool exact = false;
            bool enum_mode = enum_next_content_bytes(enum_bytes, exact);

            if (escape_pending_) {
                if (b != '\'' && b != '\\') return fail("bad escape sequence");
                if (enum_mode && !enum_bytes[b]) return fail("byte leaves every enum value");
                const ParamSpec* p = current_param();
                size_t pos = buffer_.size();
                if (enum_mode)
                    std::erase_if(enum_candidates_, [&](int i) {
                        const std::string& v = p->enum_values[static_cast<size_t>(i)];
                        return v.size() <= pos || static_cast<unsigned char>(v[pos]) != b;
                    });
                buffer_.push_back(static_cast<char>(b));
                escape_pending_ = false;
                return {};
            }
            if (utf8_.remaining == 0 && b == '\'') {
                if (enum_mode && !exact) return fail("string is not a complete enum value");
                finish_string();
                return {};
            }
            if (utf8_.remaining == 0 && b == '\\') {
                if (enum_mode && !enum_bytes['\''] && !enum_bytes['\\'])
                    return fail("escape cannot continue any enum value");
                escape_pending_ = true;
                return {};
            }
            if (!utf8_.accepts(b)) return fail("invalid UTF-8 byte in string literal");
            if (enum_mode && !enum_bytes[b]) return fail("byte leaves every enum value");
            if (enum_mode) {
                const ParamSpec* p = current_param();
                size_t pos = buffer_.size();
                std::erase_if(enum_candidates_, [&](int i) {
                    const std::string& v = p->enum_values[static_cast<size_t>(i)];
                    return v.size() <= pos || static_cast<unsigned char>(v[pos]) != b;
                });
            }
            utf8_.feed(b);
            buffer_.push_back(static_cast<char>(b));
            return {};
        }

        case Phase::InInt: {
            if (!is_byte) return fail("special token inside an integer literal");
            if (is_digit_byte(b)) {
                if (!digit_fits(b - '0')) return fail("integer literal overflows 64 bits");
                int_magnitude_ = int_magnitude_ * 10 + static_cast<uint64_t>(b - '0');
                ++int_digits_;
                return {};
            }
            if (int_digits_ == 0) return fail("expected a digit");
            if (b == ',') {
                if (schema_ && call_.args.size() + 1 >= schema_->params.size())
                    return fail("more arguments than declared parameters");
                finish_int();
                phase_ = Phase::InArgs;
                can_close_ = false;
                space_allowed_ = true;
                return {};
            }
            if (b == ')') {
                if (schema_ && call_.args.size() + 1 != schema_->params.size())
                    return fail("missing arguments");
                finish_int();
                phase_ = Phase::AwaitEnd;
                return {};
            }
            return fail("expected digit, ',' or ')'");
        }

        case Phase::AwaitSeparator: {
            if (!is_byte) return fail("expected ',' or ')'");
            if (b == ',') {
                if (schema_ && call_.args.size() >= schema_->params.size())
                    return fail("more arguments than declared parameters");
                phase_ = Phase::InArgs;
                can_close_ = false;
                space_allowed_ = true;
                return {};
            }
            if (b == ')') {
                if (schema_ && call_.args.size() != schema_->params.size())
                    return fail("missing arguments");
                phase_ = Phase::AwaitEnd;
                return {};
            }
            return fail("expected ',' or ')'");
        }

        case Phase::AwaitEnd: {
            if (id != Vocabulary::kEnd) return fail("expected <nexa_end>");
            phase_ = Phase::Done;
            return Event{EventKind::CallComplete, position_, ""};
        }

        case Phase::Done:
        case Phase::Failed:
            break;
    }
    return fail("unreachable");
}

std::vector<bool> DecoderState::allowed_next() const {
    std::vector<bool> mask(static_cast<size_t>(vocab_->size()), false);
    switch (phase_) {
        case Phase::AwaitFunc: {
            int n = vocab_->n_functional();
            if (registry_) n = std::min(n, static_cast<int>(registry_->size()));
            for (int i = 0; i < n; ++i)
                mask[static_cast<size_t>(Vocabulary::kFirstFunctional + i)] = true;
            break;
        }
        case Phase::AwaitOpen:
            mask['('] = true;
            break;
        case Phase::InArgs: {
            if (space_allowed_) mask[' '] = true;
            if (can_close_) mask[')'] = true;
            for (int b = 0; b < 256; ++b)
                if (arg_start_allowed(static_cast<unsigned char>(b)))
                    mask[static_cast<size_t>(b)] = true;
            break;
        }
        case Phase::InString: {
            std::vector<bool> enum_bytes(256, false);
            bool exact = false;
            bool enum_mode = enum_next_content_bytes(enum_bytes, exact);
            if (escape_pending_) {
                for (unsigned char c : {'\'', '\\'})
                    if (!enum_mode || enum_bytes[c]) mask[c] = true;
                break;
            }
            if (utf8_.remaining > 0) {
                for (int b = utf8_.next_min; b <= utf8_.next_max; ++b)
                    if (!enum_mode || enum_bytes[static_cast<size_t>(b)])
                        mask[static_cast<size_t>(b)] = true;
                break;
            }
            if (!enum_mode || exact) mask['\''] = true;
            if (!enum_mode || enum_bytes['\''] || enum_bytes['\\']) mask['\\'] = true;
            for (int b = 0; b < 256; ++b) {
                if (b == '\'' || b == '\\') continue;
                if (!utf8_.accepts(static_cast<unsigned char>(b))) continue;
                if (enum_mode && !enum_bytes[static_cast<size_t>(b)]) continue;
                mask[static_cast<size_t>(b)] = true;
            }
            break;
        }
        case Phase::InInt: {
            for (int d = 0; d <= 9; ++d)
                if (digit_fits(d)) mask[static_cast<size_t>('0' + d)] = true;
            if (int_digits_ > 0) {
                bool comma_ok = !schema_ || call_.args.size() + 1 < schema_->params.size();
                bool close_ok = !schema_ || call_.args.size() + 1 == schema_->params.size();
                if (comma_ok) mask[','] = true;
                if (close_ok) mask[')'] = true;
            }
            break;
        }
        case Phase::AwaitSeparator: {
            bool comma_ok = !schema_ || call_.args.size() < schema_->params.size();
            bool close_ok = !schema_ || call_.args.size() == schema_->params.size();
            if (comma_ok) mask[','] = true;
            if (close_ok) mask[')'] = true;
            break;
        }
        case Phase::AwaitEnd:
            mask[static_cast<size_t>(Vocabulary::kEnd)] = true;
            break;
        case Phase::Done:
        case Phase::Failed:
            break;
    }
    return mask;
}

// ---- validation and whole-call parsing ----

ValidationReport validate(const RawCall& raw, const Registry& registry) {
    ValidationReport report;
    const FunctionSchema* schema = nullptr;
    if (raw.token_index.has_value()) {
        int idx = *raw.token_index;
        if (idx >= 0 && idx < static_cast<int>(registry.size()))
            schema = &registry.schemas()[static_cast<size_t>(idx)];
        else
            report.violations.push_back({ViolationKind::UnknownFunction, -1,
                                         "token index " + std::to_string(idx)});
    } else if (registry.contains(raw.function_name)) {
        schema = &registry.lookup(raw.function_name);
    } else {
        report.violations.push_back(
            {ViolationKind::UnknownFunction, -1, "'" + raw.function_name + "'"});
    }

    if (schema) {
        if (raw.args.size() != schema->params.size())
            report.violations.push_back(
                {ViolationKind::ArityMismatch, -1,
                 schema->name + " takes " + std::to_string(schema->params.size()) +
                     " arguments, got " + std::to_string(raw.args.size())});
        size_t n = std::min(raw.args.size(), schema->params.size());
        for (size_t i = 0; i < n; ++i) {
            const ParamSpec& p = schema->params[i];
            bool is_string = std::holds_alternative<std::string>(raw.args[i]);
            if (p.kind == ParamKind::integer_kind) {
                if (is_string)
                    report.violations.push_back({ViolationKind::TypeMismatch, static_cast<int>(i),
                                                 p.name + " expects an integer"});
            } else {
                if (!is_string) {
                    report.violations.push_back({ViolationKind::TypeMismatch, static_cast<int>(i),
                                                 p.name + " expects a string"});
                } else if (p.kind == ParamKind::enum_kind) {
                    const std::string& v = std::get<std::string>(raw.args[i]);
                    if (std::find(p.enum_values.begin(), p.enum_values.end(), v) ==
                        p.enum_values.end())
                        report.violations.push_back({ViolationKind::EnumViolation,
                                                     static_cast<int>(i),
                                                     p.name + " value '" + v + "'"});
                }
            }
        }
    }
    report.ok = report.violations.empty();
    return report;
}

namespace {

FunctionalCall finish_parse(DecoderState& state, std::span<const int> tokens,
                            const Registry& registry) {
    for (size_t i = 0; i < tokens.size(); ++i) {
        Event ev = state.feed(tokens[i]);
        if (ev.kind == EventKind::ParseError) throw ParseFailureError(ev.position, ev.message);
        if (ev.kind == EventKind::CallComplete && i + 1 < tokens.size())
            throw ParseFailureError(static_cast<int>(i + 1), "content after <nexa_end>");
    }
    if (!state.done())
        throw ParseFailureError(state.position(), "incomplete call");

    ValidationReport report = validate(state.raw_call(), registry);
    if (!report.ok) throw ValidationFailureError(std::move(report));

    const RawCall& raw = state.raw_call();
    FunctionalCall call;
    call.token_index = raw.token_index ? *raw.token_index
                                       : registry.token_index_of(raw.function_name);
    call.schema = &registry.lookup(call.token_index);
    call.args = raw.args;
    return call;
}

}  // namespace

FunctionalCall parse_complete(std::span<const int> tokens, const Vocabulary& vocab,
                              const Registry& registry) {
    if (!registry.frozen()) throw Error(Errc::registry_not_frozen, "parse before freeze");
    DecoderState state(vocab);
    return finish_parse(state, tokens, registry);
}

FunctionalCall parse_text(std::string_view text, const Vocabulary& vocab,
                          const Registry& registry) {
    if (!registry.frozen()) throw Error(Errc::registry_not_frozen, "parse before freeze");
    std::string t = trim_copy(text);
    if (t.empty()) throw ParseFailureError(0, "empty call text");

    if (t[0] == '<') {
        std::vector<int> ids = encode(vocab, t);
        return parse_complete(ids, vocab, registry);
    }

    size_t open = t.find('(');
    if (open == std::string::npos)
        throw ParseFailureError(static_cast<int>(t.size()), "expected '('");
    std::string name = trim_copy(t.substr(0, open));
    if (!identifier_ok(name)) throw ParseFailureError(0, "bad function name '" + name + "'");

    std::string rest = t.substr(open);
    const std::string end_surface = "<nexa_end>";
    if (rest.size() < end_surface.size() ||
        rest.compare(rest.size() - end_surface.size(), end_surface.size(), end_surface) != 0)
        rest += end_surface;  // terminator is optional in name form

    DecoderState state(vocab);
    state.start_named(name);
    std::vector<int> ids = encode(vocab, rest);
    return finish_parse(state, ids, registry);
}

std::vector<bool> allowed_next(const DecoderState& state, const Vocabulary& vocab,
                               const Registry& registry) {
    (void)vocab;
    (void)registry;
    return state.allowed_next();
}

}  // namespace octofunc
