#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "flcleaner/nn.hpp"
#include "flcleaner/trigger.hpp"

namespace flcleaner {

// Conditional variational autoencoder over normalized activation maps (NAMs),
// conditioned on the trigger sample's class label. Encoder and decoder are
// two-layer MLPs with a 100-unit hidden layer. Training anneals the KL weight
// to avoid posterior collapse; scoring runs the decoder at z = mu so client
// scores are reproducible.

constexpr int kCvaeHidden = 100;

struct BetaSchedule {
    double initial = 0.0;
    double increment = 0.5;
    int step_epoch = 10;  // epochs per increment step
};

/// KL weight for a 1-based training epoch: initial + increment per completed
/// step_epoch block, so epochs 1..10 use `initial` and 11..20 add one increment.
double beta_at_epoch(const BetaSchedule& schedule, int epoch);

struct CvaeState {
    // Encoder: [x ; onehot(y)] -> hidden -> (mu, logvar)
    std::vector<double> enc_w1, enc_b1, enc_w2, enc_b2;
    // Decoder: [z ; onehot(y)] -> hidden -> sigmoid -> x_hat
    std::vector<double> dec_w1, dec_b1, dec_w2, dec_b2;
    int input_dim = 0;
    int latent_dim = 16;
    int num_classes = 10;
    double beta = 0.0;  // current annealing weight
    std::uint64_t seed = 0;

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

CvaeState init_cvae(int input_dim, int latent_dim, int num_classes, std::uint64_t seed);

/// Activation maps normalized as sigmoid(map - geomed), with the label of the
/// trigger sample that produced each map. Grouped by the harvest epoch they
/// were collected in.
struct CvaeTrainingSet {
    std::vector<std::vector<double>> nams;
    std::vector<int> labels;
    std::vector<int> harvest_epoch;
    int dim = 0;
    int num_classes = 0;
};

/// Server-side bootstrap: train a copy of the initial global model on the
/// trigger set for `warmup_epochs`, then after each of the next
/// `harvest_epochs` passes capture per-sample activation maps, normalize them
/// against that epoch's geometric median and collect sigmoid(map - geomed)
/// with labels. Yields |trigger| * harvest_epochs NAMs.
CvaeTrainingSet build_training_set(const WeightVector& global_init, const ModelSpec& spec,
                                   const TriggerSet& trigger, int warmup_epochs,
                                   int harvest_epochs, double lr, int batch_size,
                                   const LayerMask& mask, std::uint64_t seed);

struct CvaeLoss {
    double total = 0.0;
    double mse = 0.0;
    double kl = 0.0;
};

/// total = MSE(decode(mu + sigma*noise, y), x) + beta * KL(q(z|x,y) || N(0,I)).
/// `noise` must have latent_dim entries; throws NumericError on non-finite loss.
CvaeLoss cvae_loss(const std::vector<double>& x, int label, const CvaeState& state,
                   const std::vector<double>& noise);

/// Same loss plus its gradient over all CVAE parameters (flattened in
/// CvaeState::flatten order). Used by SGD and the gradient-check oracle.
std::pair<CvaeLoss, std::vector<double>> cvae_loss_and_gradient(const std::vector<double>& x,
                                                                int label,
                                                                const CvaeState& state,
                                                                const std::vector<double>& noise);

/// Mini-batch SGD on cvae_loss with KL annealing. Deterministic for a fixed
/// seed; throws NumericError if the loss diverges.
CvaeState train_cvae(const CvaeTrainingSet& ts, int epochs, const BetaSchedule& schedule,
                     double lr, int batch_size, int latent_dim, std::uint64_t seed);

/// Deterministic reconstruction error: encode, take z = mu (no sampling),
/// decode, return MSE against the input.
double reconstruction_error(const CvaeState& state, const std::vector<double>& nam, int label);

/// Decoder output at z = mu for inspection/testing.
std::vector<double> cvae_reconstruct(const CvaeState& state, const std::vector<double>& nam,
                                     int label);

/// Checkpoint: JSON header (dims, annealing position) + flat little-endian
/// doubles, same element encoding as the weight-vector format.
void save_cvae(const CvaeState& state, const std::string& path);
CvaeState load_cvae(const std::string& path);

} // namespace flcleaner
