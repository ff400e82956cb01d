#include "afrclip/sp.hpp"

#include <algorithm>

namespace afrclip::sp {

ad::Var make_visual_prompts(const ad::Var& f_cnn, const Bank& bank) {
    if (bank.k() < 1) throw ShapeError("sp::make_visual_prompts: empty bank");
    if (f_cnn->value.rows != 1 || f_cnn->value.cols != bank.adapter_w[0]->value.cols)
        throw ShapeError("sp::make_visual_prompts: cnn feature " + f_cnn->value.shape_str() +
                         " does not match adapter input width " +
                         std::to_string(bank.adapter_w[0]->value.cols));
    ad::Var rows;
    for (int i = 0; i < bank.k(); ++i) {
        ad::Var r = ad::linear(f_cnn, bank.adapter_w[i], bank.adapter_b[i]);
        rows = i == 0 ? r : ad::concat_rows(rows, r);
    }
    return rows;
}

ad::Var combine_prompts(const ad::Var& p_v, const ad::Var& p_l) {
    if (!p_v->value.same_shape(p_l->value))
        throw ShapeError("sp::combine_prompts: " + p_v->value.shape_str() + " vs " + p_l->value.shape_str());
    return ad::add(p_v, p_l);
}

TokenInjectionHook make_injection_hook(const ad::Var& prompts, const std::vector<int>& stages,
                                       int layers_per_stage) {
    if (layers_per_stage < 1) throw ShapeError("sp::make_injection_hook: layers_per_stage must be >= 1");
    int k = prompts->value.rows;
    std::vector<int> enabled = stages;
    return [prompts, enabled, layers_per_stage, k](int layer_index, const ad::Var& tokens) -> ad::Var {
        int stage = (layer_index - 1) / layers_per_stage + 1;
        if (std::find(enabled.begin(), enabled.end(), stage) == enabled.end()) return tokens;
        int n = tokens->value.rows;
        if (n < k + 1)
            throw ShapeError("sp hook: cannot replace " + std::to_string(k) + " of " + std::to_string(n) +
                             " tokens");
        if (tokens->value.cols != prompts->value.cols)
            throw ShapeError("sp hook: prompt width " + std::to_string(prompts->value.cols) +
                             " does not match token width " + std::to_string(tokens->value.cols));
        return ad::concat_rows(ad::slice_rows(tokens, 0, n - k), prompts);
    };
}

}  // namespace afrclip::sp
