#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dr {

/// Tabular softmax policy: one logit row per prompt context, a distribution
/// over a small vocabulary. The log-probability of a token sequence under a
/// context is the sum of per-token log-softmax values — a desk-scale stand-in
/// for an LLM policy, differentiable in `params`.
struct ToyPolicy {
    int contexts = 0;
    int vocab = 0;
    std::vector<double> params;  // contexts x vocab logits, row-major

    static ToyPolicy uniform(int contexts, int vocab);

    double logit(int context, int token) const { return params[index(context, token)]; }
    size_t index(int context, int token) const {
        return static_cast<size_t>(context) * vocab + token;
    }
};

struct SftItem {
    int prompt_id = 0;
    std::vector<int> tokens;
};

struct PreferenceItem {
    int prompt_id = 0;
    std::vector<int> chosen_tokens;
    std::vector<int> rejected_tokens;
    double ref_logp_chosen = 0.0;   // frozen reference policy, supplied as numbers
    double ref_logp_rejected = 0.0;
};

struct PreferenceBatch {
    std::vector<PreferenceItem> items;
};

enum class NllNormalization { per_token_mean, sum };

struct LossConfig {
    double beta = 0.1;
    double alpha = 1.0;
    NllNormalization nll_normalization = NllNormalization::per_token_mean;
};

/// Numerically stable per-row log-softmax.
std::vector<double> log_softmax_row(const ToyPolicy& policy, int context);

/// Sum of per-token log-softmax values. Throws ValidationError for tokens or
/// contexts out of range.
double seq_logprob(const ToyPolicy& policy, int prompt_id, std::span<const int> tokens);

/// Mean negative log-likelihood over the batch, per-token by default.
double sft_loss(const ToyPolicy& policy, std::span<const SftItem> batch, const LossConfig& cfg = {});
std::vector<double> sft_loss_grad(const ToyPolicy& policy, std::span<const SftItem> batch,
                                  const LossConfig& cfg = {});

struct TdpoResult {
    double loss = 0.0;
    std::vector<double> margins;  // per-item argument of the logistic
};

/// loss = -mean log sigmoid(beta * [(logpi(y_w) - ref_w) - (logpi(y_l) - ref_l)]).
/// Equals ln 2 exactly when the policy log-probs match the references.
TdpoResult tdpo_loss(const ToyPolicy& policy, const PreferenceBatch& batch, const LossConfig& cfg);
std::vector<double> tdpo_loss_grad(const ToyPolicy& policy, const PreferenceBatch& batch,
                                   const LossConfig& cfg);

/// tdpo_loss plus alpha times the chosen responses' NLL (per-token mean or
/// raw sum per cfg). alpha = 0 reduces exactly to tdpo_loss.
double rpo_loss(const ToyPolicy& policy, const PreferenceBatch& batch, const LossConfig& cfg);
std::vector<double> rpo_loss_grad(const ToyPolicy& policy, const PreferenceBatch& batch,
                                  const LossConfig& cfg);

/// A loss with its analytic gradient, for verification.
struct LossFn {
    std::function<double(const ToyPolicy&)> value;
    std::function<std::vector<double>(const ToyPolicy&)> gradient;
};

/// Compares the analytic gradient against central finite differences
/// componentwise; returns the max relative error with denominator
/// max(|analytic|, |numeric|, 1e-8).
double grad_check(const LossFn& loss, const ToyPolicy& policy, double eps);

}  // namespace dr
