#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "ganfp/csv.hpp"
#include "ganfp/error.hpp"
#include "ganfp/ganfp.hpp"

namespace ganfp::gan {

namespace {

using ad::Graph;
using ad::NodeId;

nn::NetworkSpec spec(std::vector<std::size_t> sizes, nn::OutputActivation act) {
  return nn::NetworkSpec{std::move(sizes), act, 1};
}

// c * log(q) + (1 - c) * log(1 - q), elementwise.
NodeId bernoulli_log_likelihood(Graph& g, NodeId q, const Matrix& c) {
  Matrix not_c = c;
  for (double& v : not_c.data()) v = 1.0 - v;
  NodeId pos = ad::mul_elem(g, g.constant(c), ad::log(g, q));
  NodeId negv = ad::mul_elem(g, g.constant(std::move(not_c)), ad::log(g, ad::one_minus(g, q)));
  return ad::add(g, pos, negv);
}

NodeId weighted_cross_entropy(Graph& g, NodeId prob, const Matrix& y, double w) {
  if (y.rows() != g.value(prob).rows() || y.cols() != 1) {
    throw DimensionError("cross-entropy: labels " + y.shape_string() + " vs predictions " +
                         g.value(prob).shape_string());
  }
  Matrix wy = y;
  Matrix not_y = y;
  for (std::size_t i = 0; i < y.size(); ++i) {
    wy[i] = w * y[i];
    not_y[i] = 1.0 - y[i];
  }
  NodeId pos = ad::mul_elem(g, g.constant(std::move(wy)), ad::log(g, prob));
  NodeId negv = ad::mul_elem(g, g.constant(std::move(not_y)), ad::log(g, ad::one_minus(g, prob)));
  return ad::neg(g, ad::mean_all(g, ad::add(g, pos, negv)));
}

NodeId adversarial_term(Graph& g, NodeId prob_fake, GenLoss form) {
  if (form == GenLoss::kMinimax) return ad::mean_all(g, ad::log(g, ad::one_minus(g, prob_fake)));
  return ad::neg(g, ad::mean_all(g, ad::log(g, prob_fake)));
}

void require_same_width(const char* what, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": width mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

}  // namespace

Matrix LatentBatch::generator_input() const { return hstack(hstack(z, c_cat), c_cont); }

std::vector<int> LatentBatch::labels() const {
  std::vector<int> out(c_cat.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c_cat[i] >= 0.5 ? 1 : 0;
  return out;
}

LatentBatch sample_latent(std::size_t b, Rng& rng) {
  if (b == 0) throw ParameterError("sample_latent: batch size must be >= 1");
  LatentBatch lb{Matrix(b, kNoiseDim), Matrix(b, kCategoricalDim), Matrix(b, kContinuousDim)};
  for (double& v : lb.z.data()) v = rng.uniform();
  for (double& v : lb.c_cat.data()) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  for (double& v : lb.c_cont.data()) v = rng.uniform();
  return lb;
}

LatentBatch sample_latent_with_label(std::size_t b, Rng& rng, int label) {
  LatentBatch lb = sample_latent(b, rng);
  lb.c_cat.fill(label == 1 ? 1.0 : 0.0);
  return lb;
}

Architecture Architecture::aps() {
  using nn::OutputActivation;
  Architecture a;
  a.g = spec({64, 64, 170}, OutputActivation::kLinear);
  a.d = spec({170, 64, 1}, OutputActivation::kSigmoid);
  a.q = spec({170, 64, 64, kCodeHeadWidth}, OutputActivation::kCodeHeads);
  a.p = spec({170, 64, 64, 1}, OutputActivation::kSigmoid);
  a.d2 = spec({171, 64, 1}, OutputActivation::kSigmoid);
  a.shared_prefix_k = 2;
  return a;
}

Architecture Architecture::cmapss() {
  using nn::OutputActivation;
  Architecture a;
  a.g = spec({64, 256, 500, 500, 315}, OutputActivation::kLinear);
  a.d = spec({315, 500, 500, 256, 1}, OutputActivation::kSigmoid);
  a.q = spec({315, 500, 500, 256, 64, kCodeHeadWidth}, OutputActivation::kCodeHeads);
  a.p = spec({315, 500, 500, 256, 64, 1}, OutputActivation::kSigmoid);
  a.d2 = spec({316, 500, 500, 256, 1}, OutputActivation::kSigmoid);
  a.shared_prefix_k = 4;
  return a;
}

Architecture Architecture::for_dimension(std::size_t dim, std::size_t hidden) {
  using nn::OutputActivation;
  Architecture a;
  a.g = spec({kLatentDim, hidden, dim}, OutputActivation::kLinear);
  a.d = spec({dim, hidden, 1}, OutputActivation::kSigmoid);
  a.q = spec({dim, hidden, hidden, kCodeHeadWidth}, OutputActivation::kCodeHeads);
  a.p = spec({dim, hidden, hidden, 1}, OutputActivation::kSigmoid);
  a.d2 = spec({dim + 1, hidden, 1}, OutputActivation::kSigmoid);
  a.shared_prefix_k = 2;
  return a;
}

void Architecture::validate(std::size_t dim) const {
  for (const auto* s : {&g, &d, &q, &p, &d2}) s->validate();
  auto fail = [](const std::string& msg) { throw SpecError("Architecture: " + msg); };
  if (g.input_size() != kLatentDim) fail("G input must be " + std::to_string(kLatentDim));
  if (g.output_size() != dim) fail("G output must equal data width " + std::to_string(dim));
  if (d.input_size() != dim || d.output_size() != 1) fail("D must map data width to 1");
  if (q.input_size() != dim || q.output_size() != kCodeHeadWidth) {
    fail("Q must map data width to " + std::to_string(kCodeHeadWidth) + " code heads");
  }
  if (p.input_size() != dim || p.output_size() != 1) fail("P must map data width to 1");
  if (d2.input_size() != dim + 1 || d2.output_size() != 1) fail("D2 must map data width + 1 to 1");
  if (q.output != nn::OutputActivation::kCodeHeads || q.sigmoid_heads != kCategoricalDim) {
    fail("Q needs one sigmoid categorical head");
  }
}

nn::ParamStore Networks::store() const {
  nn::ParamStore s;
  for (const auto* n : {&d, &g, &q, &p, &d2}) s.add(*n);
  return s;
}

Networks build_networks(const Architecture& arch, std::size_t shared_prefix_k,
                        std::uint64_t seed) {
  Networks n{nn::build_network("G", arch.g, derive_seed(seed, 1)),
             nn::build_network("D", arch.d, derive_seed(seed, 2)),
             nn::build_network("Q", arch.q, derive_seed(seed, 3)),
             nn::build_network("P", arch.p, derive_seed(seed, 4)),
             nn::build_network("D2", arch.d2, derive_seed(seed, 5))};
  nn::share_prefix(n.d, n.q, shared_prefix_k);
  nn::share_prefix(n.d, n.p, shared_prefix_k);
  return n;
}

void GanFpConfig::validate() const {
  if (batch_size < 2) throw ParameterError("GanFpConfig: batch_size must be >= 2");
  for (double l : {lambda_q, lambda_g, lambda_d, lambda_p, lambda_d2, lambda_l2, lambda_code}) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw ParameterError("GanFpConfig: lambdas must be >= 0");
  }
  if (!(optimizer.lr >= 0.0)) throw ParameterError("GanFpConfig: learning rate must be >= 0");
}

bool TrainHistory::all_finite() const {
  return std::all_of(records.begin(), records.end(), [](const TrainRecord& r) {
    return std::isfinite(r.d_loss) && std::isfinite(r.g_loss) && std::isfinite(r.q_loss) &&
           std::isfinite(r.l2_loss) && std::isfinite(r.d2_loss) && std::isfinite(r.p_adv_loss);
  });
}

void TrainHistory::write_csv(std::ostream& out) const {
  out << "batch,d_loss,g_loss,q_loss,l2_loss,d2_loss,p_adv_loss\n";
  for (const auto& r : records) {
    out << r.batch << ',' << csv::format(r.d_loss) << ',' << csv::format(r.g_loss) << ','
        << csv::format(r.q_loss) << ',' << csv::format(r.l2_loss) << ','
        << csv::format(r.d2_loss) << ',' << csv::format(r.p_adv_loss) << '\n';
  }
}

double class_weight(std::span<const int> y) {
  const auto fail = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  const std::size_t nonfail = y.size() - fail;
  if (fail == 0 || nonfail == 0) {
    throw DegenerateDataError("class_weight: need both classes (" + std::to_string(fail) +
                              " failures, " + std::to_string(nonfail) + " non-failures)");
  }
  return static_cast<double>(nonfail) / static_cast<double>(fail);
}

NodeId loss_module1_d(Graph& g, const nn::Network& d, NodeId x_real, NodeId x_fake) {
  require_same_width("loss_module1_d", g.value(x_real), g.value(x_fake));
  NodeId real_term = ad::mean_all(g, ad::log(g, d.forward(g, x_real)));
  NodeId fake_term = ad::mean_all(g, ad::log(g, ad::one_minus(g, d.forward(g, x_fake))));
  return ad::add(g, real_term, fake_term);
}

NodeId loss_mutual(Graph& g, const nn::Network& q, const LatentBatch& latent, NodeId x_fake) {
  const std::size_t b = latent.size();
  if (g.value(x_fake).rows() != b) {
    throw DimensionError("loss_mutual: " + std::to_string(b) + " codes vs " +
                         g.value(x_fake).shape_string() + " samples");
  }
  NodeId heads = q.forward(g, x_fake);
  NodeId q_cat = ad::slice_cols(g, heads, 0, kCategoricalDim);
  NodeId mu = ad::slice_cols(g, heads, kCategoricalDim, kContinuousDim);

  NodeId cat = ad::mean_all(g, bernoulli_log_likelihood(g, q_cat, latent.c_cat));
  NodeId diff = ad::sub(g, g.constant(latent.c_cont), mu);
  // Sum over code dimensions, mean over the batch.
  NodeId cont = ad::mul_scalar(g, ad::sum_all(g, ad::square(g, diff)),
                               -0.5 / static_cast<double>(b));
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi) * kContinuousDim;
  return ad::add(g, ad::add(g, cat, cont), g.constant(Matrix(1, 1, log_norm)));
}

NodeId generator_term(Graph& g, const nn::Network& d, NodeId x_fake, GenLoss form) {
  return adversarial_term(g, d.forward(g, x_fake), form);
}

NodeId loss_module1_gq(Graph& g, const nn::Network& gen, const nn::Network& q,
                       const nn::Network& d, const LatentBatch& latent, double lambda_q,
                       GenLoss form) {
  NodeId x_fake = gen.forward(g, g.constant(latent.generator_input()));
  NodeId adv = generator_term(g, d, x_fake, form);
  NodeId mutual = loss_mutual(g, q, latent, x_fake);
  return ad::sub(g, adv, ad::mul_scalar(g, mutual, lambda_q));
}

NodeId loss_module2(Graph& g, const nn::Network& p, NodeId x_real, const Matrix& y_real,
                    double w) {
  return weighted_cross_entropy(g, p.forward(g, x_real), y_real, w);
}

NodeId loss_code_anchor(Graph& g, const nn::Network& q, NodeId x_real, const Matrix& y_real,
                        double w) {
  NodeId q_cat = ad::slice_cols(g, q.forward(g, x_real), 0, kCategoricalDim);
  return weighted_cross_entropy(g, q_cat, y_real, w);
}

NodeId loss_module3_d2(Graph& g, const nn::Network& d2, NodeId x_real, NodeId y_real,
                       NodeId x_fake, NodeId y_fake) {
  require_same_width("loss_module3_d2", g.value(x_real), g.value(x_fake));
  NodeId real_pair = ad::concat_cols(g, x_real, y_real);
  NodeId fake_pair = ad::concat_cols(g, x_fake, y_fake);
  NodeId real_term = ad::mean_all(g, ad::log(g, d2.forward(g, real_pair)));
  NodeId fake_term = ad::mean_all(g, ad::log(g, ad::one_minus(g, d2.forward(g, fake_pair))));
  return ad::add(g, real_term, fake_term);
}

NodeId loss_module3_p(Graph& g, const nn::Network& p, const nn::Network& d2, NodeId x_fake,
                      GenLoss form) {
  NodeId pair = ad::concat_cols(g, x_fake, p.forward(g, x_fake));
  return adversarial_term(g, d2.forward(g, pair), form);
}

Matrix generate(const nn::Network& g, const LatentBatch& latent) {
  return g.infer(latent.generator_input());
}

std::vector<double> predict(const nn::Network& p, const Matrix& X) {
  const Matrix out = p.infer(X);
  if (out.cols() != 1) throw DimensionError("predict: network must have a single output");
  return std::vector<double>(out.data().begin(), out.data().end());
}

}  // namespace ganfp::gan
