#pragma once

#include <string>

#include "afrclip/autodiff.hpp"
#include "afrclip/backbone.hpp"

namespace afrclip::prompts {

// The three text prompts for one object class: a normal-state description,
// an abnormal-state description, and a stateless description that names the
// category without any state word.
struct PromptTriplet {
    std::string normal;
    std::string abnormal;
    std::string stateless;
    std::string class_name;
};

struct Templates {
    std::string normal = "a photo of a normal {c}";
    std::string abnormal = "a photo of a defective {c}";
    std::string stateless = "a photo of a {c}";
};

// Post-adapter text embeddings; the two stateful ones act as fixed scoring
// prototypes, the stateless one is the rectification target.
struct TextEmbeddings {
    ad::Var f_n;
    ad::Var f_a;
    ad::Var f_s;
};

PromptTriplet build_prompt_triplet(const std::string& class_name, const Templates& templates);

// f_x = adapter(encode_text(T^x)) for x in {n, a, s}; one shared adapter.
TextEmbeddings embed_prompts(const PromptTriplet& triplet, const Backbone& backbone,
                             const ad::Var& adapter_w, const ad::Var& adapter_b);

// Raw (pre-adapter) encoder outputs, cacheable because the encoder is frozen.
struct RawTriplet {
    Mat normal, abnormal, stateless;
};
RawTriplet encode_triplet(const PromptTriplet& triplet, const Backbone& backbone);
TextEmbeddings adapt_triplet(const RawTriplet& raw, const ad::Var& adapter_w, const ad::Var& adapter_b);

}  // namespace afrclip::prompts
