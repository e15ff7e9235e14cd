#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "octofunc/error.hpp"
#include "octofunc/schema.hpp"
#include "octofunc/tokenizer.hpp"

namespace octofunc {

// Call grammar over token ids:
//   CALL    := FUNC_TOKEN '(' ARG_LIST? ')' END_TOKEN
//   ARG_LIST:= ARG (',' ' '? ARG)*
//   ARG     := STRING | INTEGER
//   STRING  := '\'' content-with-\'-and-\\-escapes '\''
//   INTEGER := '-'? digits
// FUNC_TOKEN and END_TOKEN are atomic vocabulary ids; all other terminals are
// byte tokens. String content must be valid UTF-8.

enum class Phase {
    AwaitFunc,
    AwaitOpen,
    InArgs,
    InString,
    InInt,
    AwaitSeparator,
    AwaitEnd,
    Done,
    Failed
};

enum class EventKind { None, CallComplete, ParseError };

struct Event {
    EventKind kind = EventKind::None;
    int position = -1;  // token index of the offending token for ParseError
    std::string message;
};

// Parse result before schema validation. Exactly one of token_index /
// function_name identifies the function (name only for name-form text).
struct RawCall {
    std::optional<int> token_index;
    std::string function_name;
    std::vector<ArgValue> args;
};

enum class ViolationKind { ArityMismatch, TypeMismatch, EnumViolation, UnknownFunction };

const char* violation_kind_name(ViolationKind k);

struct Violation {
    ViolationKind kind;
    int param_index = -1;  // -1 when not tied to one parameter
    std::string detail;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;
};

class ParseFailureError : public Error {
public:
    ParseFailureError(int position, const std::string& msg)
        : Error(Errc::parse_failure, msg + " (position " + std::to_string(position) + ")"),
          position_(position) {}
    int position() const { return position_; }

private:
    int position_;
};

class ValidationFailureError : public Error {
public:
    explicit ValidationFailureError(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

// Single-pass streaming decoder. Without a registry the machine accepts the
// pure grammar and leaves schema checks to validate(); with a registry it
// additionally enforces the schema shape (known function, per-position
// argument kind, arity, enum value prefixes), which is what makes
// grammar-masked generation emit only calls that also validate. In both modes
// allowed_next() admits exactly the ids feed() would accept.
class DecoderState {
public:
    explicit DecoderState(const Vocabulary& vocab, const Registry* registry = nullptr);

    Event feed(int token_id);

    // Boolean mask over the whole vocabulary. All-false once Done/Failed.
    std::vector<bool> allowed_next() const;

    // Name-form entry: skip AwaitFunc with an already-known function name.
    void start_named(std::string function_name);

    Phase phase() const { return phase_; }
    bool done() const { return phase_ == Phase::Done; }
    bool failed() const { return phase_ == Phase::Failed; }
    int position() const { return position_; }
    const RawCall& raw_call() const { return call_; }
    const std::string& error_message() const { return error_; }

private:
    struct Utf8Acceptor {
        int remaining = 0;
        unsigned char next_min = 0x80, next_max = 0xBF;
        bool feed(unsigned char b);
        bool accepts(unsigned char b) const;
        void reset() { remaining = 0; }
    };

    Event fail(const std::string& msg);
    Event transition(int token_id);
    void begin_arg(unsigned char b);       // first byte of an arg (quote, digit, '-')
    bool arg_start_allowed(unsigned char b) const;
    void finish_string();
    void finish_int();
    void after_arg();
    const ParamSpec* current_param() const;   // strict mode only, else nullptr
    bool enum_next_content_bytes(std::vector<bool>& bytes, bool& exact_now) const;
    bool digit_fits(int digit) const;

    const Vocabulary* vocab_;
    const Registry* registry_;
    const FunctionSchema* schema_ = nullptr;  // strict mode, once function known

    Phase phase_ = Phase::AwaitFunc;
    int position_ = 0;
    std::string error_;
    RawCall call_;

    // string literal state
    std::string buffer_;
    bool escape_pending_ = false;
    Utf8Acceptor utf8_;
    std::vector<int> enum_candidates_;  // indices into current enum param values

    // integer literal state
    bool int_negative_ = false;
    int int_digits_ = 0;
    uint64_t int_magnitude_ = 0;

    // arg-list state
    bool can_close_ = false;     // ')' legal right now (InArgs)
    bool space_allowed_ = false; // optional single space after ','
};

// Run the lenient machine to completion, then validate. ParseFailureError
// carries the token position; ValidationFailureError the full report.
FunctionalCall parse_complete(std::span<const int> tokens, const Vocabulary& vocab,
                              const Registry& registry);

// Text entry point. Token-form text is encoded and parsed as-is; name-form
// (`fname(...)`) resolves the name through the registry and treats the
// trailing <nexa_end> as optional.
FunctionalCall parse_text(std::string_view text, const Vocabulary& vocab,
                          const Registry& registry);

// Collects every violation (function existence, arity, per-position kind,
// enum membership), not just the first.
ValidationReport validate(const RawCall& raw, const Registry& registry);

std::vector<bool> allowed_next(const DecoderState& state, const Vocabulary& vocab,
                               const Registry& registry);

}  // namespace octofunc
