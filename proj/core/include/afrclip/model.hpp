#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "afrclip/backbone.hpp"
#include "afrclip/cmfr.hpp"
#include "afrclip/config.hpp"
#include "afrclip/prompts.hpp"
#include "afrclip/sp.hpp"

namespace afrclip {

// name -> trainable parameter node. The frozen backbone and CNN stem never
// appear here; only these tensors are updated and checkpointed.
using ParameterRegistry = std::map<std::string, ad::Var>;

// The full inference-time state: frozen backbone plus all trainable
// adapters. Trainables are initialized from train.seed via the same
// name-keyed scheme the surrogate backbone uses (the CMFR output projection
// starts at zero so rectification begins as the identity).
struct Model {
    RunConfig cfg;
    Backbone backbone;

    std::array<ad::Var, 4> vis_adapter_w;  // [D x D_v] per stage
    std::array<ad::Var, 4> vis_adapter_b;  // [1 x D]
    ad::Var text_adapter_w;                // [D x D_text]
    ad::Var text_adapter_b;                // [1 x D]
    std::array<cmfr::Weights, 4> cmfr_w;
    sp::Bank sp_bank;

    // metadata stored alongside the tensors (train dataset id, epoch, ...)
    std::map<std::string, std::string> checkpoint_meta;

    static Model create(const RunConfig& cfg);

    ParameterRegistry registry() const;

    // Raw text-encoder outputs per class are constants; cache them. If the
    // AFR_CACHE environment variable names a directory, the cache also
    // persists there keyed by backbone id and prompt content.
    const prompts::RawTriplet& raw_prompts(const std::string& class_name) const;
    prompts::TextEmbeddings text_embeddings(const std::string& class_name) const;

    void save_checkpoint(const std::string& dir,
                         const std::map<std::string, std::string>& extra_meta = {}) const;
    static Model load_checkpoint(const std::string& dir);

private:
    struct PromptCache {
        std::mutex mutex;
        std::map<std::string, prompts::RawTriplet> raw;
    };
    std::shared_ptr<PromptCache> prompt_cache_ = std::make_shared<PromptCache>();
};

}  // namespace afrclip
