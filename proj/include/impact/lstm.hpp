#ifndef IMPACT_LSTM_HPP
#define IMPACT_LSTM_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "impact/errors.hpp"
#include "impact/geometry.hpp"
#include "impact/random.hpp"
#include "impact/types.hpp"

namespace impact {

// Scalar: layer 1 returns the full sequence, layer 2 only its final state,
// the dense head maps that state to one value. Sequence: both layers return
// sequences and the dense head is applied at every timestep.
enum class OutputMode { Scalar, Sequence };

enum class LossKind { MeanAbsolute, MeanSquared };

struct Hyperparameters {
  int hidden_units = 16;
  double learning_rate = 5e-3;
  int epochs = 40;
  double dropout_rate = 0.0;
  double l2_kernel = 0.0;
  int batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const {
    require(hidden_units > 0 && epochs > 0 && batch_size > 0,
            ErrorCode::InvalidArgument, "hidden units, epochs and batch size must be positive");
    require(learning_rate > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
    require(dropout_rate >= 0.0 && dropout_rate < 1.0, ErrorCode::InvalidArgument,
            "dropout rate must lie in [0, 1)");
    require(l2_kernel >= 0.0, ErrorCode::InvalidArgument, "l2 penalty must be >= 0");
  }
};

// One LSTM layer's parameters. Gate rows are packed [input; forget;
// candidate; output], each hidden_units wide.
struct LstmLayer {
  Eigen::MatrixXd wx;  // 4D x input_dim (the "kernel", carries the L2 penalty)
  Eigen::MatrixXd wh;  // 4D x D
  Eigen::VectorXd b;   // 4D
};

struct TargetStats {
  double mean = 0.0;
  double std = 1.0;
};

struct LstmModel {
  OutputMode mode = OutputMode::Scalar;
  int input_dim = kFeatureChannels;
  int hidden = 0;
  LstmLayer l1, l2;
  Eigen::VectorXd dense_w;  // D
  double dense_b = 0.0;
  ChannelStats feature_stats;  // z-scoring applied to inputs before forward
  TargetStats target_stats;    // z-scoring applied to targets during training
  std::string target_name;
  Hyperparameters hyper;

  int output_length() const { return mode == OutputMode::Scalar ? 1 : kSamples; }
};

// Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases except the
// forget-gate block at 1.
LstmModel init_model(OutputMode mode, const std::string& target_name,
                     const Hyperparameters& hyper, Rng& rng,
                     int input_dim = kFeatureChannels);

// Forward pass on one already-normalized tensor. With training=true, dropout
// masks drawn from rng are applied after each LSTM layer. Returns one value
// (Scalar) or 145 (Sequence).
Eigen::VectorXd forward(const LstmModel& model, const FeatureTensor& normalized,
                        bool training = false, Rng* rng = nullptr);

// MAE (or squared-error) over all output elements plus
// l2_kernel * (|wx1|^2 + |wx2|^2).
double loss(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets,
            const LstmModel& model, double l2_kernel,
            LossKind kind = LossKind::MeanAbsolute);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

// Raw (unnormalized) features and targets in original units; targets hold one
// row per sample, 1 or 145 columns depending on the output mode.
struct RegressionDataset {
  std::vector<const Eigen::MatrixXd*> features;
  Eigen::MatrixXd targets;

  Eigen::Index size() const { return static_cast<Eigen::Index>(features.size()); }
};

struct TrainingLog {
  std::vector<double> train_loss;  // per epoch, normalized units
  std::vector<double> val_mae;     // per epoch, original units
  int best_epoch = -1;
  double best_val_mae = 0.0;
};

struct TrainResult {
  LstmModel model;
  TrainingLog log;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the MAE objective with exact
// backpropagation through time; |x| takes subgradient 0 at 0. Normalization
// stats are fit on the training split only. The returned parameters are the
// ones with the best per-epoch validation MAE.
TrainResult train(const RegressionDataset& train_set, const RegressionDataset& val_set,
                  const Hyperparameters& hyper, OutputMode mode,
                  const std::string& target_name);

// Spec-shaped convenience overload: carves a validation split of the given
// fraction off the end of a seed-shuffled copy of the dataset.
TrainResult train(const RegressionDataset& dataset, const Hyperparameters& hyper,
                  double val_split, OutputMode mode, const std::string& target_name);

// ---------------------------------------------------------------------------
// Hyperparameter search
// ---------------------------------------------------------------------------

struct HyperGrid {
  std::vector<int> hidden_units = {16};
  std::vector<double> learning_rate = {5e-3};
  std::vector<int> epochs = {40};
  std::vector<double> dropout_rate = {0.0};
  std::vector<double> l2_kernel = {0.0};
  std::vector<int> batch_size = {32};
};

// Exhaustive grid search minimizing validation MAE; exact ties go to the
// smaller hidden size, then the smaller learning rate.
Hyperparameters tune(const RegressionDataset& train_set, const RegressionDataset& val_set,
                     const HyperGrid& grid, OutputMode mode, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Prediction
// ---------------------------------------------------------------------------

struct ImpactInfo {
  double speed_mps = 0.0;
  double alpha_deg = 0.0;
  double beta_deg = 0.0;
  double y_mm = 0.0;
  double z_mm = 0.0;
};

// Model bundle order: speed, alpha, beta, y, z.
inline constexpr std::array<const char*, 5> kScalarTargets = {"speed", "alpha", "beta",
                                                              "y", "z"};

ImpactInfo predict_impact_info(const std::array<const LstmModel*, 5>& models,
                               const FeatureTensor& raw_features);

// Helmet and head/face force profiles in kN, clamped at zero.
std::pair<ForceProfile, ForceProfile> predict_force(const LstmModel& helmet_model,
                                                    const LstmModel& head_model,
                                                    const FeatureTensor& raw_features);

struct LocationPrediction {
  ImpactLocation location;
  HelmetRegion region = HelmetRegion::Facemask;
  // True when the predicted line missed the sphere and the closest surface
  // point was used instead.
  bool missed_sphere = false;
};

// Assembles the predicted setup and pushes it through the impact-line
// geometry; lines that miss the sphere are projected to the closest surface
// point and flagged.
LocationPrediction predict_location(const std::array<const LstmModel*, 5>& models,
                                    const FeatureTensor& raw_features);
LocationPrediction location_from_setup(const ImpactSetup& setup);

// Denormalized model output (original units) for a raw feature tensor.
Eigen::VectorXd predict(const LstmModel& model, const FeatureTensor& raw_features);

// ---------------------------------------------------------------------------
// Persistence: one versioned binary file per model (header + row-major
// 64-bit weight blobs). The loader rejects other versions.
// ---------------------------------------------------------------------------

void save_model(const std::filesystem::path& path, const LstmModel& model);
LstmModel load_model(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Introspection used by the gradient checks and the optimizer: named views of
// every parameter array.
// ---------------------------------------------------------------------------

struct ParamView {
  std::string name;
  double* data;
  Eigen::Index size;
};

std::vector<ParamView> parameter_views(LstmModel& model);

struct Gradients {
  LstmLayer l1, l2;
  Eigen::VectorXd dense_w;
  double dense_b = 0.0;
};

std::vector<ParamView> gradient_views(Gradients& grads);

// Loss and exact gradients for a (normalized-space) batch; the workhorse
// behind train() and the finite-difference oracle.
double compute_loss(const LstmModel& model,
                    const std::vector<const Eigen::MatrixXd*>& normalized_features,
                    const Eigen::MatrixXd& normalized_targets, LossKind kind,
                    double l2_kernel);
double compute_gradients(const LstmModel& model,
                         const std::vector<const Eigen::MatrixXd*>& normalized_features,
                         const Eigen::MatrixXd& normalized_targets, LossKind kind,
                         double l2_kernel, Gradients& grads);

}  // namespace impact

#endif  // IMPACT_LSTM_HPP
