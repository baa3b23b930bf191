#include <algorithm>
#include <cmath>

#include "ganfp/error.hpp"
#include "ganfp/ganfp.hpp"

namespace ganfp::gan {

namespace {

using ad::Graph;
using ad::NodeId;
using nn::Direction;

std::vector<ad::ParamRef> refs(const std::vector<nn::NamedParam>& params) {
  std::vector<ad::ParamRef> out;
  for (const auto& p : params) out.push_back(p.value);
  return out;
}

std::vector<ad::ParamRef> generator_side_params(const Networks& n) {
  std::vector<ad::ParamRef> out = n.g.parameter_refs();
  for (auto& r : refs(n.q.own_parameters())) out.push_back(std::move(r));
  return out;
}

RealBatch draw_batch(const Matrix& X, std::span<const int> y, std::size_t b, Rng& rng) {
  std::vector<std::size_t> rows(b);
  for (auto& r : rows) r = rng.index(X.rows());
  RealBatch batch{select_rows(X, rows), Matrix(b, 1)};
  for (std::size_t i = 0; i < b; ++i) batch.y[i] = y[rows[i]];
  return batch;
}

void check_training_data(const Matrix& X, std::span<const int> y) {
  if (X.rows() != y.size()) {
    throw DimensionError("train: " + std::to_string(X.rows()) + " rows vs " +
                         std::to_string(y.size()) + " labels");
  }
  if (X.rows() == 0) throw DegenerateDataError("train: empty dataset");
}

}  // namespace

Trainer::Trainer(const GanFpConfig& config, const Architecture& arch, const Matrix& X,
                 std::span<const int> y, ModuleMask mask)
    : config_(config), mask_(mask), X_(X), y_(y.begin(), y.end()), rng_(derive_seed(config.seed, 0)) {
  config_.validate();
  check_training_data(X, y);
  arch.validate(X.cols());
  weight_ = class_weight(y);
  nets_ = build_networks(arch, config_.shared_prefix_k, config_.seed);
  opt_d_ = nn::Optimizer(config_.optimizer, nets_.d.parameter_refs());
  opt_gq_ = nn::Optimizer(config_.optimizer, generator_side_params(nets_));
  opt_p_ = nn::Optimizer(config_.optimizer, nets_.p.parameter_refs());
  opt_d2_ = nn::Optimizer(config_.optimizer, nets_.d2.parameter_refs());
}

double Trainer::checked(double value, const char* name) const {
  if (!std::isfinite(value)) {
    throw NumericError("batch " + std::to_string(batches_done() + 1) + ": " + name +
                       " is not finite");
  }
  return value;
}

RealBatch Trainer::sample_real() { return draw_batch(X_, y_, config_.batch_size, rng_); }

LatentBatch Trainer::sample_latent() { return gan::sample_latent(config_.batch_size, rng_); }

double Trainer::update_discriminator(const RealBatch& real, const LatentBatch& latent) {
  const Matrix x_fake = generate(nets_.g, latent);
  Graph g;
  NodeId value = loss_module1_d(g, nets_.d, g.constant(real.x), g.constant(x_fake));
  const double v = checked(g.value(value)[0], "d_loss");
  if (config_.lambda_d > 0.0) {
    opt_d_.step(g.backward(ad::mul_scalar(g, value, config_.lambda_d)), Direction::kAscend);
  }
  return -v;
}

std::pair<double, double> Trainer::update_generator(const RealBatch& real,
                                                    const LatentBatch& latent) {
  Graph g;
  NodeId x_fake = nets_.g.forward(g, g.constant(latent.generator_input()));
  NodeId adv = generator_term(g, nets_.d, x_fake, config_.gen_loss);
  NodeId mutual = loss_mutual(g, nets_.q, latent, x_fake);
  NodeId l1 = ad::sub(g, adv, ad::mul_scalar(g, mutual, config_.lambda_q));
  NodeId total = ad::mul_scalar(g, l1, config_.lambda_g);
  if (config_.lambda_code > 0.0) {
    NodeId anchor = loss_code_anchor(g, nets_.q, g.constant(real.x), real.y, weight_);
    checked(g.value(anchor)[0], "code_anchor");
    total = ad::add(g, total, ad::mul_scalar(g, anchor, config_.lambda_code));
  }
  const double adv_v = checked(g.value(adv)[0], "g_loss");
  const double q_v = -checked(g.value(mutual)[0], "q_loss");
  if (config_.lambda_g == 0.0 && config_.lambda_code == 0.0) return {adv_v, q_v};
  if (!config_.code_from_real_labels || config_.lambda_code == 0.0) {
    opt_gq_.step(g.backward(total), Direction::kDescend);
    return {adv_v, q_v};
  }
  // G takes the full L1 gradient. Q's own layers take only the continuous
  // part of the mutual-information term plus the anchor, so the categorical
  // head is fit to real labels and G has to produce samples that match it.
  ad::Gradients grads = g.backward(ad::mul_scalar(g, l1, config_.lambda_g));
  Graph h;
  NodeId heads = nets_.q.forward(h, h.constant(g.value(x_fake)));
  NodeId mu = ad::slice_cols(h, heads, kCategoricalDim, kContinuousDim);
  NodeId sq = ad::sum_all(h, ad::square(h, ad::sub(h, h.constant(latent.c_cont), mu)));
  NodeId cont = ad::mul_scalar(h, sq, 0.5 / static_cast<double>(latent.size()));
  NodeId anchor = loss_code_anchor(h, nets_.q, h.constant(real.x), real.y, weight_);
  NodeId q_total = ad::add(h, ad::mul_scalar(h, cont, config_.lambda_g * config_.lambda_q),
                           ad::mul_scalar(h, anchor, config_.lambda_code));
  const ad::Gradients q_grads = h.backward(q_total);
  for (const auto& p : nets_.q.own_parameters()) grads.set(p.value, q_grads.at(p.value));
  opt_gq_.step(grads, Direction::kDescend);
  return {adv_v, q_v};
}

double Trainer::update_inference(const RealBatch& real) {
  Graph g;
  NodeId loss = loss_module2(g, nets_.p, g.constant(real.x), real.y, weight_);
  const double v = checked(g.value(loss)[0], "l2_loss");
  if (config_.lambda_l2 > 0.0) {
    opt_p_.step(g.backward(ad::mul_scalar(g, loss, config_.lambda_l2)), Direction::kDescend);
  }
  return v;
}

double Trainer::update_pair_discriminator(const RealBatch& real, const Matrix& x_fake) {
  const Matrix y_fake = nets_.p.infer(x_fake);
  Graph g;
  NodeId value = loss_module3_d2(g, nets_.d2, g.constant(real.x), g.constant(real.y),
                                 g.constant(x_fake), g.constant(y_fake));
  const double v = checked(g.value(value)[0], "d2_loss");
  if (config_.lambda_d2 > 0.0) {
    opt_d2_.step(g.backward(ad::mul_scalar(g, value, config_.lambda_d2)), Direction::kAscend);
  }
  return -v;
}

double Trainer::update_inference_adversarial(const Matrix& x_fake) {
  Graph g;
  NodeId loss = loss_module3_p(g, nets_.p, nets_.d2, g.constant(x_fake), config_.gen_loss);
  const double v = checked(g.value(loss)[0], "p_adv_loss");
  if (config_.lambda_p > 0.0) {
    opt_p_.step(g.backward(ad::mul_scalar(g, loss, config_.lambda_p)), Direction::kDescend);
  }
  return v;
}

const TrainRecord& Trainer::run_batch() {
  TrainRecord rec;
  rec.batch = batches_done() + 1;
  const RealBatch real = sample_real();
  const LatentBatch latent = sample_latent();
  if (mask_.module1) {
    rec.d_loss = update_discriminator(real, latent);
    std::tie(rec.g_loss, rec.q_loss) = update_generator(real, latent);
  }
  if (mask_.module2) rec.l2_loss = update_inference(real);
  if (mask_.module3) {
    const Matrix x_fake = generate(nets_.g, latent);
    rec.d2_loss = update_pair_discriminator(real, x_fake);
    rec.p_adv_loss = update_inference_adversarial(x_fake);
  }
  history_.records.push_back(rec);
  return history_.records.back();
}

void Trainer::run() {
  while (batches_done() < config_.total_batches) run_batch();
}

TrainedModel train(const GanFpConfig& config, const Architecture& arch, const Matrix& X,
                   std::span<const int> y, ModuleMask mask) {
  Trainer trainer(config, arch, X, y, mask);
  trainer.run();
  return {std::move(trainer.networks()), trainer.history()};
}

nn::Network train_dnn(const nn::NetworkSpec& spec, const Matrix& X, std::span<const int> y,
                      double w, const DnnConfig& config) {
  check_training_data(X, y);
  if (config.batch_size < 1) throw ParameterError("train_dnn: batch_size must be >= 1");
  if (spec.input_size() != X.cols()) {
    throw DimensionError("train_dnn: network input " + std::to_string(spec.input_size()) +
                         " vs data width " + std::to_string(X.cols()));
  }
  nn::Network p = nn::build_network("P", spec, derive_seed(config.seed, 4));
  nn::Optimizer opt(config.optimizer, p.parameter_refs());
  Rng rng(derive_seed(config.seed, 100));
  for (std::size_t batch = 0; batch < config.total_batches; ++batch) {
    const RealBatch real = draw_batch(X, y, config.batch_size, rng);
    Graph g;
    NodeId loss = loss_module2(g, p, g.constant(real.x), real.y, w);
    if (!std::isfinite(g.value(loss)[0])) {
      throw NumericError("train_dnn: batch " + std::to_string(batch + 1) + " loss is not finite");
    }
    opt.step(g.backward(loss), Direction::kDescend);
  }
  return p;
}

AugmentedModel train_infogan_aug(const GanFpConfig& config, const Architecture& arch,
                                 const Matrix& X, std::span<const int> y,
                                 std::optional<std::size_t> n_generated) {
  Trainer trainer(config, arch, X, y, ModuleMask{true, false, false});
  trainer.run();

  const auto fail = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  const std::size_t nonfail = y.size() - fail;
  const std::size_t n_gen = n_generated.value_or(nonfail > fail ? nonfail - fail : 0);

  AugmentedModel out;
  out.X = X;
  out.y.assign(y.begin(), y.end());
  if (n_gen > 0) {
    Rng rng(derive_seed(config.seed, 200));
    const LatentBatch latent = sample_latent_with_label(n_gen, rng, 1);
    out.X = vstack(out.X, generate(trainer.networks().g, latent));
    out.y.insert(out.y.end(), n_gen, 1);
  }
  const DnnConfig dnn{config.batch_size, config.total_batches, config.optimizer, config.seed};
  out.p = train_dnn(arch.p, out.X, out.y, 1.0, dnn);
  return out;
}

}  // namespace ganfp::gan
