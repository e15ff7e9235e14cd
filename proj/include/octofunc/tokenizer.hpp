#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace octofunc {

// Byte-level vocabulary: ids 0..255 are raw byte values, special tokens start
// at id 256 in a fixed order (<pad>, <bos>, <eos>, <img>, <nexa_end>), and
// functional tokens <nexa_0>..<nexa_n-1> follow from id 261 once extended.
class Vocabulary {
public:
    static constexpr int kByteRegion = 256;
    static constexpr int kPad = 256;
    static constexpr int kBos = 257;
    static constexpr int kEos = 258;
    static constexpr int kImg = 259;
    static constexpr int kEnd = 260;
    static constexpr int kFirstFunctional = 261;

    // The five control specials, no functional tokens.
    static Vocabulary base();

    // Reconstruct from a serialized specials list (checkpoint header).
    static Vocabulary from_specials(const std::vector<std::string>& specials, bool extended);

    int size() const { return kByteRegion + static_cast<int>(specials_.size()); }
    bool extended() const { return extended_; }
    int n_functional() const { return n_functional_; }

    bool is_special(int id) const { return id >= kByteRegion && id < size(); }
    bool is_functional(int id) const {
        return id >= kFirstFunctional && id < kFirstFunctional + n_functional_;
    }
    int functional_id(int index) const;
    int functional_index(int id) const;
    const std::string& surface(int id) const;  // specials only
    const std::vector<std::string>& specials() const { return specials_; }

private:
    std::vector<std::string> specials_;
    bool extended_ = false;
    int n_functional_ = 0;

    friend Vocabulary extend_with_functional_tokens(const Vocabulary&, int);
};

// Appends <nexa_0>..<nexa_n-1>; existing ids are unchanged. AlreadyExtended if
// the vocabulary already went through an extension (even with n = 0).
Vocabulary extend_with_functional_tokens(const Vocabulary& vocab, int n);

// Special surfaces are matched longest-first, left-to-right, and emitted as
// single atomic ids; everything else becomes raw byte ids.
std::vector<int> encode(const Vocabulary& vocab, std::string_view text);

// Exact inverse of encode. InvalidTokenId on out-of-range ids.
std::string decode(const Vocabulary& vocab, std::span<const int> tokens);

}  // namespace octofunc
