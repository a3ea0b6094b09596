#ifndef ETSDM_MLP_HPP
#define ETSDM_MLP_HPP

#include <iosfwd>
#include <vector>

#include "mixture.hpp"
#include "rng.hpp"

namespace etsdm {

enum class Activation { SiLU, ReLU };

struct MlpSpec {
    int data_dim = 2;
    std::vector<int> hidden = {128, 128, 128};
    Activation activation = Activation::SiLU;
    int embedding_dim = 32;  // sinusoidal time embedding, must be even
    // The raw condition is multiplied by this before embedding; 1000 mirrors
    // discrete-timestep conventions for conditions in [0,1], remapped
    // conditions arrive pre-stretched and use 1.
    double cond_scale = 1000.0;
};

// Small fully connected eps/v predictor network with manual reverse-mode
// gradients. Input is [x, sinusoidal_embedding(cond)].
class Mlp {
  public:
    struct Layer {
        Mat W;  // out x in
        Vec b;
    };

    Mlp(MlpSpec spec, uint64_t seed);

    const MlpSpec& spec() const { return spec_; }
    int input_dim() const;

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    // Rows of X are samples, conds holds one condition value per row.
    Mat forward(const Mat& X, const Vec& conds) const;

    struct Cache {
        Mat input;               // n x input_dim
        std::vector<Mat> pre;    // pre-activations per layer
        std::vector<Mat> post;   // activations per layer (post[last] = output)
    };
    Mat forward_cached(const Mat& X, const Vec& conds, Cache& cache) const;

    // Gradients of a scalar loss with upstream dL/d(output); accumulates
    // into grads (which must match the layer shapes, zero-init by caller).
    void backward(const Cache& cache, const Mat& d_out, std::vector<Layer>& grads) const;

    std::vector<Layer> zero_like() const;

    Mat embed(const Vec& conds) const;

    void save(std::ostream& os) const;
    static Mlp load(std::istream& is);

  private:
    MlpSpec spec_;
    std::vector<Layer> layers_;
    std::vector<double> inv_freqs_;
};

}  // namespace etsdm

#endif
