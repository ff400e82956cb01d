#include "afrclip/prompts.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace afrclip::prompts {

namespace {

std::string substitute(const std::string& tmpl, const std::string& class_name) {
    auto pos = tmpl.find("{c}");
    if (pos == std::string::npos)
        throw ConfigError("prompt template missing '{c}' placeholder: \"" + tmpl + "\"");
    if (tmpl.find("{c}", pos + 3) != std::string::npos)
        throw ConfigError("prompt template has multiple '{c}' placeholders: \"" + tmpl + "\"");
    std::string out = tmpl;
    out.replace(pos, 3, class_name);
    return out;
}

bool contains_word(const std::string& text, const std::string& word) {
    size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string::npos) {
        bool left_ok = pos == 0 || !std::isalpha(static_cast<unsigned char>(text[pos - 1]));
        size_t end = pos + word.size();
        bool right_ok = end == text.size() || !std::isalpha(static_cast<unsigned char>(text[end]));
        if (left_ok && right_ok) return true;
        pos = end;
    }
    return false;
}

}  // namespace

PromptTriplet build_prompt_triplet(const std::string& class_name, const Templates& templates) {
    if (class_name.empty()) throw ConfigError("build_prompt_triplet: empty class name");
    std::string lowered = class_name;
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    PromptTriplet t;
    t.class_name = lowered;
    t.normal = substitute(templates.normal, lowered);
    t.abnormal = substitute(templates.abnormal, lowered);
    t.stateless = substitute(templates.stateless, lowered);

    static const std::array<const char*, 8> state_words = {"normal",  "abnormal", "defective", "damaged",
                                                           "broken",  "flawless", "perfect",   "anomalous"};
    for (const char* w : state_words)
        if (contains_word(t.stateless, w))
            throw ConfigError(std::string("stateless prompt contains state word '") + w + "': \"" +
                              t.stateless + "\"");
    return t;
}

RawTriplet encode_triplet(const PromptTriplet& triplet, const Backbone& backbone) {
    return RawTriplet{backbone.encode_text(triplet.normal), backbone.encode_text(triplet.abnormal),
                      backbone.encode_text(triplet.stateless)};
}

TextEmbeddings adapt_triplet(const RawTriplet& raw, const ad::Var& adapter_w, const ad::Var& adapter_b) {
    return TextEmbeddings{ad::linear(ad::constant(raw.normal), adapter_w, adapter_b),
                          ad::linear(ad::constant(raw.abnormal), adapter_w, adapter_b),
                          ad::linear(ad::constant(raw.stateless), adapter_w, adapter_b)};
}

TextEmbeddings embed_prompts(const PromptTriplet& triplet, const Backbone& backbone,
                             const ad::Var& adapter_w, const ad::Var& adapter_b) {
    return adapt_triplet(encode_triplet(triplet, backbone), adapter_w, adapter_b);
}

}  // namespace afrclip::prompts
