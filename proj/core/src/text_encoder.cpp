// SPDX-License-Identifier: Apache-2.0
#include "tagan/text_encoder.hpp"

namespace tagan {

template <typename S>
TextEncoderParams<S> TextEncoderParams<S>::create(ParamStore<S>& store,
                                                  const std::string& prefix,
                                                  const TextEncoderConfig& cfg,
                                                  Rng& rng) {
  if (cfg.vocab_size < 2) throw ContractError("text encoder needs a vocabulary");
  if (cfg.d_word < 1) throw ContractError("d_word must be positive");
  TextEncoderParams p;
  p.cfg = cfg;
  p.embedding = &store.create(prefix + "/emb", {cfg.vocab_size, cfg.d_word});
  init_normal(*p.embedding, rng, 0.1);
  p.gru_fwd = nn::GruParams<S>::create(store, prefix + "/gru_f", cfg.d_word,
                                       cfg.d_word, rng);
  p.gru_bwd = nn::GruParams<S>::create(store, prefix + "/gru_b", cfg.d_word,
                                       cfg.d_word, rng);
  if (cfg.scales > 0) {
    p.layer_proj = &store.create(prefix + "/layer_proj", {cfg.scales, cfg.d_word});
    init_normal(*p.layer_proj, rng, 0.02);
  }
  if (cfg.d_cond > 0) {
    p.ca_mu = nn::LinearParams<S>::create(store, prefix + "/ca_mu", cfg.d_word,
                                          cfg.d_cond, rng);
    p.ca_log_sigma = nn::LinearParams<S>::create(store, prefix + "/ca_sig",
                                                 cfg.d_word, cfg.d_cond, rng);
  }
  return p;
}

template <typename S>
BoundTextEncoder<S> TextEncoderParams<S>::bind(ad::Graph<S>& graph,
                                               bool frozen) const {
  return BoundTextEncoder<S>(this, &graph, nn::Binder<S>{&graph, frozen});
}

template <typename S>
BoundTextEncoder<S>::BoundTextEncoder(const TextEncoderParams<S>* params,
                                      ad::Graph<S>* graph,
                                      const nn::Binder<S>& binder)
    : params_(params), graph_(graph) {
  embedding_ = binder(*params->embedding);
  fwd_ = nn::bind(params->gru_fwd, binder);
  bwd_ = nn::bind(params->gru_bwd, binder);
  if (params->cfg.scales > 0) layer_proj_ = binder(*params->layer_proj);
  if (params->cfg.d_cond > 0) {
    ca_mu_ = nn::bind(params->ca_mu, binder);
    ca_log_sigma_ = nn::bind(params->ca_log_sigma, binder);
  }
}

template <typename S>
WordFeatures<S> BoundTextEncoder<S>::encode_words(
    const std::vector<int>& token_ids) const {
  const int t_len = static_cast<int>(token_ids.size());
  if (t_len < 1) throw ContractError("encode_words: caption must be non-empty");
  for (int id : token_ids) {
    if (id < 0 || id >= params_->cfg.vocab_size) {
      throw VocabularyError("token id " + std::to_string(id) +
                            " outside vocabulary of size " +
                            std::to_string(params_->cfg.vocab_size));
    }
  }
  const int d = params_->cfg.d_word;

  std::vector<ad::Tensor<S>> inputs(t_len);
  for (int i = 0; i < t_len; ++i) inputs[i] = ad::row(embedding_, token_ids[i]);

  auto zero_state = [&] { return graph_->constant(TensorData<S>({d})); };

  std::vector<ad::Tensor<S>> fwd_states(t_len);
  ad::Tensor<S> h = zero_state();
  for (int i = 0; i < t_len; ++i) {
    h = nn::gru_cell(inputs[i], h, fwd_);
    fwd_states[i] = h;
  }
  std::vector<ad::Tensor<S>> words(t_len);
  h = zero_state();
  for (int i = t_len - 1; i >= 0; --i) {
    h = nn::gru_cell(inputs[i], h, bwd_);
    words[i] = ad::add(fwd_states[i], h);
  }

  WordFeatures<S> f;
  f.w = ad::stack_rows(std::span<const ad::Tensor<S>>(words));
  f.u = ad::mean_rows(f.w);
  return f;
}

template <typename S>
ad::Tensor<S> BoundTextEncoder<S>::word_attention(const WordFeatures<S>& f) const {
  return ad::softmax(ad::matvec(f.w, f.u));
}

template <typename S>
ad::Tensor<S> BoundTextEncoder<S>::layer_weights(const WordFeatures<S>& f) const {
  if (params_->cfg.scales <= 0) {
    throw ContractError("this text encoder has no layer-weight head");
  }
  // Logits [T, J]: row i is P w_i for the shared projection P.
  const int t_len = f.w.shape()[0];
  std::vector<ad::Tensor<S>> rows(static_cast<std::size_t>(t_len));
  for (int i = 0; i < t_len; ++i) {
    rows[static_cast<std::size_t>(i)] = ad::matvec(layer_proj_, ad::row(f.w, i));
  }
  auto logits = ad::stack_rows(std::span<const ad::Tensor<S>>(rows));
  return ad::softmax_rows(logits);
}

template <typename S>
SentenceConditioning<S> BoundTextEncoder<S>::condition_augment(
    const WordFeatures<S>& f, Rng& rng, bool deterministic) const {
  if (params_->cfg.d_cond <= 0) {
    throw ContractError("this text encoder has no conditioning head");
  }
  SentenceConditioning<S> c;
  c.mu = ca_mu_(f.u);
  c.log_sigma = ca_log_sigma_(f.u);
  if (deterministic) {
    c.sample = c.mu;
  } else {
    TensorData<S> eps({params_->cfg.d_cond});
    for (auto& v : eps.data) v = static_cast<S>(rng.normal());
    c.sample = ad::add(c.mu, ad::mul(ad::exp(c.log_sigma), graph_->constant(eps)));
  }
  // KL(N(mu, diag sigma^2) || N(0, I)) = 0.5 sum(mu^2 + sigma^2 - 1 - 2 log sigma)
  auto mu_sq = ad::mul(c.mu, c.mu);
  auto sigma_sq = ad::exp(ad::mul_scalar(c.log_sigma, 2.0));
  auto inner = ad::add_scalar(
      ad::sub(ad::add(mu_sq, sigma_sq), ad::mul_scalar(c.log_sigma, 2.0)), -1.0);
  c.kl = ad::mul_scalar(ad::sum(inner), 0.5);
  return c;
}

template struct TextEncoderParams<float>;
template struct TextEncoderParams<double>;
template class BoundTextEncoder<float>;
template class BoundTextEncoder<double>;

}  // namespace tagan
