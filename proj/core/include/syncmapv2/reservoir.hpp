#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include <Eigen/Dense>

#include "syncmapv2/errors.hpp"
#include "syncmapv2/image.hpp"

namespace syncmap {

struct EsnParams {
    int n_neurons = 512;
    double spectral_radius = 1.1;
    double sparsity = 0.9;         // fraction of recurrent weights zeroed
    double leak = 0.5;
    double input_scaling = 1.0;
    double weight_scaling = 2.0;   // pre-rescale shaping only
    int input_dim = 18;
    std::uint64_t seed = 0;

    void validate() const;
};

struct EsnWeights {
    Eigen::MatrixXd w_in;  // n_neurons x input_dim
    Eigen::MatrixXd w;     // n_neurons x n_neurons
};

// Recorded reservoir trajectory; row t is the state after input column t.
using PatchResponse = Eigen::MatrixXd;  // T x n_neurons

// Draws both matrices i.i.d. standard normal from the seeded generator,
// applies the scaling factors, zeroes a uniformly chosen subset of
// round(sparsity * n^2) recurrent entries, and rescales the recurrent
// matrix to the requested spectral radius.
EsnWeights init_esn(const EsnParams& params);

// Largest absolute eigenvalue, via power iteration on an 8-column block
// (tolerance 1e-9, iteration cap 10000). Non-convergence throws
// NumericError carrying the last estimate.
double spectral_radius(const Eigen::MatrixXd& w);

// One leaky-tanh update: x~ = tanh(W_in u + W x); returns (1-a) x + a x~.
Eigen::VectorXd esn_step(const EsnWeights& weights, const Eigen::VectorXd& state,
                         const Eigen::VectorXd& u, double leak);

// Runs the full sequence from the zero state and records every state.
PatchResponse run_patch(const EsnWeights& weights, const InputSequence& seq,
                        double leak);

// Binary weight file so runs can pin the random network.
void save_esn(const EsnParams& params, const EsnWeights& weights,
              const std::filesystem::path& path);
std::pair<EsnParams, EsnWeights> load_esn(const std::filesystem::path& path);

}  // namespace syncmap
