#include "octofunc/tokenizer.hpp"

#include "octofunc/error.hpp"

namespace octofunc {

Vocabulary Vocabulary::base() {
    Vocabulary v;
    v.specials_ = {"<pad>", "<bos>", "<eos>", "<img>", "<nexa_end>"};
    return v;
}

Vocabulary Vocabulary::from_specials(const std::vector<std::string>& specials, bool extended) {
    Vocabulary base_v = base();
    if (specials.size() < base_v.specials_.size())
        throw Error(Errc::invalid_config, "specials list shorter than the control set");
    for (size_t i = 0; i < base_v.specials_.size(); ++i) {
        if (specials[i] != base_v.specials_[i])
            throw Error(Errc::invalid_config, "control special mismatch at id " +
                                                  std::to_string(kByteRegion + i));
    }
    Vocabulary v;
    v.specials_ = specials;
    v.extended_ = extended;
    v.n_functional_ = static_cast<int>(specials.size() - base_v.specials_.size());
    return v;
}

int Vocabulary::functional_id(int index) const {
    if (index < 0 || index >= n_functional_)
        throw Error(Errc::invalid_token_id, "functional index " + std::to_string(index) +
                                                " out of range");
    return kFirstFunctional + index;
}

int Vocabulary::functional_index(int id) const {
    if (!is_functional(id))
        throw Error(Errc::invalid_token_id, "id " + std::to_string(id) + " is not functional");
    return id - kFirstFunctional;
}

const std::string& Vocabulary::surface(int id) const {
    if (!is_special(id))
        throw Error(Errc::invalid_token_id, "id " + std::to_string(id) + " has no surface");
    return specials_[static_cast<size_t>(id - kByteRegion)];
}

Vocabulary extend_with_functional_tokens(const Vocabulary& vocab, int n) {
    if (vocab.extended_)
        throw Error(Errc::already_extended, "functional tokens already added");
    if (n < 0) throw Error(Errc::invalid_config, "negative functional token count");
    Vocabulary v = vocab;
    for (int i = 0; i < n; ++i) v.specials_.push_back("<nexa_" + std::to_string(i) + ">");
    v.extended_ = true;
    v.n_functional_ = n;
    return v;
}

std::vector<int> encode(const Vocabulary& vocab, std::string_view text) {
    std::vector<int> out;
    out.reserve(text.size());
    const auto& specials = vocab.specials();
    size_t i = 0;
    while (i < text.size()) {
        int best = -1;
        size_t best_len = 0;
        if (text[i] == '<') {  // all special surfaces start with '<'
            for (size_t s = 0; s < specials.size(); ++s) {
                const std::string& surf = specials[s];
                if (surf.size() > best_len && text.compare(i, surf.size(), surf) == 0) {
                    best = Vocabulary::kByteRegion + static_cast<int>(s);
                    best_len = surf.size();
                }
            }
        }
        if (best >= 0) {
            out.push_back(best);
            i += best_len;
        } else {
            out.push_back(static_cast<unsigned char>(text[i]));
            ++i;
        }
    }
    return out;
}

std::string decode(const Vocabulary& vocab, std::span<const int> tokens) {
    std::string out;
    for (int id : tokens) {
        if (id < 0 || id >= vocab.size())
            throw Error(Errc::invalid_token_id,
                        "id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(vocab.size()));
        if (id < Vocabulary::kByteRegion)
            out.push_back(static_cast<char>(static_cast<unsigned char>(id)));
        else
            out += vocab.surface(id);
    }
    return out;
}

}  // namespace octofunc
