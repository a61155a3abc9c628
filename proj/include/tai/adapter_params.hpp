#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tai/numkit.hpp"

namespace tai {

// Shape of the adapter network: input_dim -> hidden[0] -> ... -> num_labels.
struct AdapterShape {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t num_labels = 0;
    double dropout = 0.5;
    // Literal variant: ReLU and dropout after the output layer too.
    bool activate_output = false;

    std::size_t layer_count() const noexcept { return hidden.size() + 1; }
    std::size_t layer_input(std::size_t layer) const;
    std::size_t layer_output(std::size_t layer) const;
    std::size_t parameter_count() const;
    void validate() const;

    friend bool operator==(const AdapterShape&, const AdapterShape&) = default;
};

struct AdapterLayer {
    DenseMatrix weight;  // out x in
    std::vector<double> bias;

    friend bool operator==(const AdapterLayer&, const AdapterLayer&) = default;
};

struct AdapterParams {
    AdapterShape shape;
    std::vector<AdapterLayer> layers;

    static AdapterParams zeros(const AdapterShape& shape);

    bool all_finite() const;
    // Rounds every parameter to the nearest float, the precision checkpoints store.
    void round_to_float();

    friend bool operator==(const AdapterParams&, const AdapterParams&) = default;
};

struct AdapterCheckpoint {
    AdapterParams params;
    std::uint64_t vocab_hash = 0;
    std::uint64_t seed = 0;

    friend bool operator==(const AdapterCheckpoint&, const AdapterCheckpoint&) = default;
};

}  // namespace tai
