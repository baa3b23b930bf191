#pragma once

// GAN-FP: an infoGAN (G, D, Q) that generates failure and non-failure samples,
// an inference network P trained with class-weighted cross-entropy on real
// data, and a pair discriminator D2 that judges (sample, label) pairs with P
// acting as the label generator. D, Q and P share their first layers.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ganfp/autodiff.hpp"
#include "ganfp/matrix.hpp"
#include "ganfp/nn.hpp"
#include "ganfp/optimizer.hpp"
#include "ganfp/rng.hpp"

namespace ganfp::gan {

inline constexpr std::size_t kNoiseDim = 60;
inline constexpr std::size_t kCategoricalDim = 1;
inline constexpr std::size_t kContinuousDim = 3;
inline constexpr std::size_t kLatentDim = kNoiseDim + kCategoricalDim + kContinuousDim;
/// Q output: categorical probability followed by continuous-code means.
inline constexpr std::size_t kCodeHeadWidth = kCategoricalDim + kContinuousDim;

struct LatentBatch {
  Matrix z;       // b x 60, U[0,1)
  Matrix c_cat;   // b x 1, 0 or 1 with equal probability
  Matrix c_cont;  // b x 3, U[0,1)

  std::size_t size() const { return z.rows(); }
  /// [z | c_cat | c_cont], the generator input (b x 64).
  Matrix generator_input() const;
  std::vector<int> labels() const;
};

/// Draws z, then the categorical codes, then the continuous codes.
LatentBatch sample_latent(std::size_t b, Rng& rng);
/// Same as sample_latent but with every categorical code set to `label`.
LatentBatch sample_latent_with_label(std::size_t b, Rng& rng, int label);

/// Layer-size lists for the five networks.
struct Architecture {
  nn::NetworkSpec g;
  nn::NetworkSpec d;
  nn::NetworkSpec q;
  nn::NetworkSpec p;
  nn::NetworkSpec d2;
  /// Recommended shared prefix, counted in layer-size entries.
  std::size_t shared_prefix_k = 2;

  /// 170-wide APS layout.
  static Architecture aps();
  /// 315-wide CMAPSS window layout.
  static Architecture cmapss();
  /// APS-shaped networks around an arbitrary data width.
  static Architecture for_dimension(std::size_t dim, std::size_t hidden = 64);

  /// Throws SpecError unless every network fits a `dim`-wide dataset.
  void validate(std::size_t dim) const;
  std::size_t data_dim() const { return d.input_size(); }
};

/// The five networks with the shared prefix already bound.
struct Networks {
  nn::Network g;
  nn::Network d;
  nn::Network q;
  nn::Network p;
  nn::Network d2;

  /// Registered as D, G, Q, P, D2 so shared layers carry D's names.
  nn::ParamStore store() const;
};

Networks build_networks(const Architecture& arch, std::size_t shared_prefix_k,
                        std::uint64_t seed);

enum class GenLoss {
  /// -mean(log D(fake)).
  kNonSaturating,
  /// mean(log(1 - D(fake))), the literal minimax form.
  kMinimax,
};

struct GanFpConfig {
  double lambda_q = 1.0;
  double lambda_g = 1.0;
  double lambda_d = 1.0;
  double lambda_p = 1.0;
  double lambda_d2 = 1.0;
  double lambda_l2 = 1.0;
  /// Weight of the categorical-code anchor: Q's categorical head fit to real
  /// labels so that code 1 means failure. 0 disables it.
  double lambda_code = 1.0;
  /// With the anchor on, Q's categorical head learns from real labels only;
  /// its mutual-information gradient still reaches G. Off, Q's head also
  /// follows the generated codes.
  bool code_from_real_labels = true;
  std::size_t batch_size = 64;
  std::size_t total_batches = 3000;
  nn::OptimizerConfig optimizer;
  GenLoss gen_loss = GenLoss::kNonSaturating;
  std::size_t shared_prefix_k = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Losses recorded after each batch, each in the sign its network minimises.
struct TrainRecord {
  std::size_t batch = 0;
  double d_loss = 0.0;      // -V(D)
  double g_loss = 0.0;      // generator adversarial term
  double q_loss = 0.0;      // -L_mutual
  double l2_loss = 0.0;     // weighted cross-entropy of P
  double d2_loss = 0.0;     // -L3(D2)
  double p_adv_loss = 0.0;  // P's adversarial term against D2
};

struct TrainHistory {
  std::vector<TrainRecord> records;

  bool all_finite() const;
  /// Header `batch,d_loss,g_loss,q_loss,l2_loss,d2_loss,p_adv_loss`.
  void write_csv(std::ostream& out) const;
};

/// n_nonfailure / n_failure. Throws DegenerateDataError if a class is absent.
double class_weight(std::span<const int> y);

// Loss builders. Inputs passed as NodeId are whatever the caller recorded on
// the graph; pass constants to keep a network out of the gradient.

/// mean(log D(x_real)) + mean(log(1 - D(x_fake))). D ascends this.
ad::NodeId loss_module1_d(ad::Graph& g, const nn::Network& d, ad::NodeId x_real,
                          ad::NodeId x_fake);

/// Monte-Carlo mutual-information bound without the H(c) constant:
/// mean over the batch of
///   c log q + (1-c) log(1-q) + sum_j [-(c_j - mu_j)^2 / 2 - ln(2 pi) / 2]
/// with q and mu read from Q's heads on x_fake.
ad::NodeId loss_mutual(ad::Graph& g, const nn::Network& q, const LatentBatch& latent,
                       ad::NodeId x_fake);

/// Generator adversarial term on x_fake for the chosen form.
ad::NodeId generator_term(ad::Graph& g, const nn::Network& d, ad::NodeId x_fake, GenLoss form);

/// generator_term(D, G(z,c)) - lambda_q * L_mutual. G and Q descend this.
ad::NodeId loss_module1_gq(ad::Graph& g, const nn::Network& gen, const nn::Network& q,
                           const nn::Network& d, const LatentBatch& latent, double lambda_q,
                           GenLoss form = GenLoss::kMinimax);

/// mean(-w y log P(x) - (1-y) log(1 - P(x))).
ad::NodeId loss_module2(ad::Graph& g, const nn::Network& p, ad::NodeId x_real,
                        const Matrix& y_real, double w);

/// Same weighted cross-entropy on Q's categorical head.
ad::NodeId loss_code_anchor(ad::Graph& g, const nn::Network& q, ad::NodeId x_real,
                            const Matrix& y_real, double w);

/// mean(log D2([x_real | y_real])) + mean(log(1 - D2([x_fake | y_fake]))).
/// D2 ascends this.
ad::NodeId loss_module3_d2(ad::Graph& g, const nn::Network& d2, ad::NodeId x_real,
                           ad::NodeId y_real, ad::NodeId x_fake, ad::NodeId y_fake);

/// Adversarial term of P against D2 on the pair [x_fake | P(x_fake)]:
/// mean(log(1 - D2(.))) for minimax, -mean(log D2(.)) for non-saturating.
ad::NodeId loss_module3_p(ad::Graph& g, const nn::Network& p, const nn::Network& d2,
                          ad::NodeId x_fake, GenLoss form = GenLoss::kMinimax);

Matrix generate(const nn::Network& g, const LatentBatch& latent);
/// Failure probabilities, one per row of X.
std::vector<double> predict(const nn::Network& p, const Matrix& X);

struct RealBatch {
  Matrix x;
  Matrix y;  // b x 1
};

/// Which modules take part in each batch. Module 1 without 2 and 3 is plain
/// infoGAN training.
struct ModuleMask {
  bool module1 = true;
  bool module2 = true;
  bool module3 = true;
};

/// Runs the mini-batch loop one step at a time. Each batch: draw real pairs,
/// draw latent codes, then update D, then G and Q, then P on the weighted
/// loss, then D2, then P against D2. An update whose lambda is 0 is skipped.
class Trainer {
 public:
  Trainer(const GanFpConfig& config, const Architecture& arch, const Matrix& X,
          std::span<const int> y, ModuleMask mask = {});

  RealBatch sample_real();
  LatentBatch sample_latent();

  /// Ascends lambda_d * V(D) with G's output held fixed. Returns -V(D).
  double update_discriminator(const RealBatch& real, const LatentBatch& latent);
  /// Descends lambda_g * L1(G,Q) (+ lambda_code * anchor). Only G and Q's own
  /// layers move. Returns {generator term, -L_mutual}.
  std::pair<double, double> update_generator(const RealBatch& real, const LatentBatch& latent);
  /// Descends lambda_l2 * L2(P). Returns L2.
  double update_inference(const RealBatch& real);
  /// Ascends lambda_d2 * L3(D2) with labels P(x_fake) held fixed. Returns -L3.
  double update_pair_discriminator(const RealBatch& real, const Matrix& x_fake);
  /// Descends lambda_p * P's adversarial term. Returns that term.
  double update_inference_adversarial(const Matrix& x_fake);

  /// One full batch; appends to the history. Throws NumericError naming the
  /// batch and loss if any loss is not finite.
  const TrainRecord& run_batch();
  /// Runs batches until total_batches have been done.
  void run();

  Networks& networks() { return nets_; }
  const Networks& networks() const { return nets_; }
  const TrainHistory& history() const { return history_; }
  double weight() const { return weight_; }
  std::size_t batches_done() const { return history_.records.size(); }

 private:
  double checked(double value, const char* name) const;

  GanFpConfig config_;
  ModuleMask mask_;
  Networks nets_;
  Matrix X_;
  std::vector<int> y_;
  double weight_;
  Rng rng_;
  nn::Optimizer opt_d_;
  nn::Optimizer opt_gq_;
  nn::Optimizer opt_p_;
  nn::Optimizer opt_d2_;
  TrainHistory history_;
};

struct TrainedModel {
  Networks networks;
  TrainHistory history;
};

TrainedModel train(const GanFpConfig& config, const Architecture& arch, const Matrix& X,
                   std::span<const int> y, ModuleMask mask = {});

/// Plain classifier training with the weighted cross-entropy, used by the
/// DNN baselines. Batches are drawn uniformly with replacement.
struct DnnConfig {
  std::size_t batch_size = 64;
  std::size_t total_batches = 3000;
  nn::OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

nn::Network train_dnn(const nn::NetworkSpec& spec, const Matrix& X, std::span<const int> y,
                      double w, const DnnConfig& config);

struct AugmentedModel {
  nn::Network p;
  /// Real rows followed by generated failure rows.
  Matrix X;
  std::vector<int> y;
};

/// Trains module 1 alone, generates failure samples until the classes balance
/// (or exactly `n_generated` when given), then trains a fresh unshared P with
/// unweighted cross-entropy on real plus generated data.
AugmentedModel train_infogan_aug(const GanFpConfig& config, const Architecture& arch,
                                 const Matrix& X, std::span<const int> y,
                                 std::optional<std::size_t> n_generated = std::nullopt);

}  // namespace ganfp::gan
