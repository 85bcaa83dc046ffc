#include "dr/distill_losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dr/errors.hpp"

namespace dr {

namespace {

double log_sigmoid(double x) {
    return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void check_tokens(const ToyPolicy& policy, int prompt_id, std::span<const int> tokens) {
    if (prompt_id < 0 || prompt_id >= policy.contexts) {
        throw ValidationError("seq_logprob: context " + std::to_string(prompt_id) +
                              " out of range [0, " + std::to_string(policy.contexts) + ")");
    }
    if (tokens.empty()) throw ValidationError("seq_logprob: empty token sequence");
    for (int t : tokens) {
        if (t < 0 || t >= policy.vocab) {
            throw ValidationError("seq_logprob: token " + std::to_string(t) + " out of vocab [0, " +
                                  std::to_string(policy.vocab) + ")");
        }
    }
}

double item_scale(size_t n_tokens, NllNormalization norm) {
    return norm == NllNormalization::per_token_mean ? 1.0 / static_cast<double>(n_tokens) : 1.0;
}

// Adds scale * d(seq_logprob)/d(params) for one sequence into grad.
void accumulate_logprob_grad(const ToyPolicy& policy, int prompt_id, std::span<const int> tokens,
                             double scale, std::vector<double>& grad) {
    const std::vector<double> ls = log_softmax_row(policy, prompt_id);
    const double n = static_cast<double>(tokens.size());
    std::vector<double> counts(policy.vocab, 0.0);
    for (int t : tokens) counts[t] += 1.0;
    for (int v = 0; v < policy.vocab; ++v) {
        grad[policy.index(prompt_id, v)] += scale * (counts[v] - n * std::exp(ls[v]));
    }
}

void check_pref_batch(const PreferenceBatch& batch, const LossConfig& cfg) {
    if (batch.items.empty()) throw ValidationError("preference batch is empty");
    if (!(cfg.beta > 0.0)) throw ValidationError("beta must be > 0");
}

}  // namespace

ToyPolicy ToyPolicy::uniform(int contexts, int vocab) {
    ToyPolicy p;
    p.contexts = contexts;
    p.vocab = vocab;
    p.params.assign(static_cast<size_t>(contexts) * vocab, 0.0);
    return p;
}

std::vector<double> log_softmax_row(const ToyPolicy& policy, int context) {
    std::vector<double> row(policy.vocab);
    double max_logit = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < policy.vocab; ++v) {
        max_logit = std::max(max_logit, policy.logit(context, v));
    }
    double sum = 0.0;
    for (int v = 0; v < policy.vocab; ++v) {
        sum += std::exp(policy.logit(context, v) - max_logit);
    }
    const double lse = max_logit + std::log(sum);
    for (int v = 0; v < policy.vocab; ++v) {
        row[v] = policy.logit(context, v) - lse;
    }
    return row;
}

double seq_logprob(const ToyPolicy& policy, int prompt_id, std::span<const int> tokens) {
    check_tokens(policy, prompt_id, tokens);
    const std::vector<double> ls = log_softmax_row(policy, prompt_id);
    double sum = 0.0;
    for (int t : tokens) sum += ls[t];
    return sum;
}

double sft_loss(const ToyPolicy& policy, std::span<const SftItem> batch, const LossConfig& cfg) {
    if (batch.empty()) throw ValidationError("sft batch is empty");
    double total = 0.0;
    for (const SftItem& item : batch) {
        total += -seq_logprob(policy, item.prompt_id, item.tokens) *
                 item_scale(item.tokens.size(), cfg.nll_normalization);
    }
    return total / static_cast<double>(batch.size());
}

std::vector<double> sft_loss_grad(const ToyPolicy& policy, std::span<const SftItem> batch,
                                  const LossConfig& cfg) {
    if (batch.empty()) throw ValidationError("sft batch is empty");
    std::vector<double> grad(policy.params.size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const SftItem& item : batch) {
        check_tokens(policy, item.prompt_id, item.tokens);
        accumulate_logprob_grad(policy, item.prompt_id, item.tokens,
                                -inv_b * item_scale(item.tokens.size(), cfg.nll_normalization),
                                grad);
    }
    return grad;
}

TdpoResult tdpo_loss(const ToyPolicy& policy, const PreferenceBatch& batch, const LossConfig& cfg) {
    check_pref_batch(batch, cfg);
    TdpoResult result;
    result.margins.reserve(batch.items.size());
    double total = 0.0;
    for (const PreferenceItem& item : batch.items) {
        const double lp_w = seq_logprob(policy, item.prompt_id, item.chosen_tokens);
        const double lp_l = seq_logprob(policy, item.prompt_id, item.rejected_tokens);
        const double margin =
            cfg.beta * ((lp_w - item.ref_logp_chosen) - (lp_l - item.ref_logp_rejected));
        result.margins.push_back(margin);
        total += -log_sigmoid(margin);
    }
    result.loss = total / static_cast<double>(batch.items.size());
    return result;
}

std::vector<double> tdpo_loss_grad(const ToyPolicy& policy, const PreferenceBatch& batch,
                                   const LossConfig& cfg) {
    check_pref_batch(batch, cfg);
    std::vector<double> grad(policy.params.size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.items.size());
    for (const PreferenceItem& item : batch.items) {
        const double lp_w = seq_logprob(policy, item.prompt_id, item.chosen_tokens);
        const double lp_l = seq_logprob(policy, item.prompt_id, item.rejected_tokens);
        const double margin =
            cfg.beta * ((lp_w - item.ref_logp_chosen) - (lp_l - item.ref_logp_rejected));
        // d(-log sigmoid(m))/dm = -(1 - sigmoid(m))
        const double dm = -inv_b * (1.0 - sigmoid(margin)) * cfg.beta;
        accumulate_logprob_grad(policy, item.prompt_id, item.chosen_tokens, dm, grad);
        accumulate_logprob_grad(policy, item.prompt_id, item.rejected_tokens, -dm, grad);
    }
    return grad;
}

double rpo_loss(const ToyPolicy& policy, const PreferenceBatch& batch, const LossConfig& cfg) {
    if (cfg.alpha < 0.0) throw ValidationError("alpha must be >= 0");
    double total = tdpo_loss(policy, batch, cfg).loss;
    double nll = 0.0;
    for (const PreferenceItem& item : batch.items) {
        nll += -seq_logprob(policy, item.prompt_id, item.chosen_tokens) *
               item_scale(item.chosen_tokens.size(), cfg.nll_normalization);
    }
    return total + cfg.alpha * nll / static_cast<double>(batch.items.size());
}

std::vector<double> rpo_loss_grad(const ToyPolicy& policy, const PreferenceBatch& batch,
                                  const LossConfig& cfg) {
    if (cfg.alpha < 0.0) throw ValidationError("alpha must be >= 0");
    std::vector<double> grad = tdpo_loss_grad(policy, batch, cfg);
    const double inv_b = 1.0 / static_cast<double>(batch.items.size());
    for (const PreferenceItem& item : batch.items) {
        accumulate_logprob_grad(
            policy, item.prompt_id, item.chosen_tokens,
            -cfg.alpha * inv_b * item_scale(item.chosen_tokens.size(), cfg.nll_normalization), grad);
    }
    return grad;
}

double grad_check(const LossFn& loss, const ToyPolicy& policy, double eps) {
    if (!(eps > 0.0)) throw ValidationError("grad_check: eps must be > 0");
    const double base = loss.value(policy);
    if (!std::isfinite(base)) throw ValidationError("grad_check: non-finite loss");
    const std::vector<double> analytic = loss.gradient(policy);

    double max_rel_err = 0.0;
    ToyPolicy probe = policy;
    for (size_t i = 0; i < probe.params.size(); ++i) {
        const double saved = probe.params[i];
        probe.params[i] = saved + eps;
        const double plus = loss.value(probe);
        probe.params[i] = saved - eps;
        const double minus = loss.value(probe);
        probe.params[i] = saved;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
            throw ValidationError("grad_check: non-finite loss under perturbation");
        }
        const double numeric = (plus - minus) / (2.0 * eps);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
        max_rel_err = std::max(max_rel_err, std::abs(analytic[i] - numeric) / denom);
    }
    return max_rel_err;
}

}  // namespace dr
