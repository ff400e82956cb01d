#pragma once

#include <vector>

#include "afrclip/autodiff.hpp"
#include "afrclip/backbone.hpp"

namespace afrclip::sp {

// Self-prompting bank: K independent linear adapters that map the global CNN
// feature to K visual prompt tokens, plus K learnable unified tokens added
// on top. The combined tokens replace the last K tokens of the hooked
// transformer layers.
struct Bank {
    std::vector<ad::Var> adapter_w;  // K x [D_v x D_cnn]
    std::vector<ad::Var> adapter_b;  // K x [1 x D_v]
    ad::Var p_l;                     // [K x D_v]
    int k() const { return static_cast<int>(adapter_w.size()); }
};

// Row i = adapter_i(f_cnn); f_cnn is [1 x D_cnn].
ad::Var make_visual_prompts(const ad::Var& f_cnn, const Bank& bank);

// Elementwise sum of the image-specific and unified prompts.
ad::Var combine_prompts(const ad::Var& p_v, const ad::Var& p_l);

// Hook that swaps the last K tokens for `prompts` at every layer of the
// enabled stages. The backbone never invokes hooks at layer 1, so the first
// layer's input is always the unmodified embedding.
TokenInjectionHook make_injection_hook(const ad::Var& prompts, const std::vector<int>& stages,
                                       int layers_per_stage);

}  // namespace afrclip::sp
