#include "tai/adapter_params.hpp"

#include <cmath>
#include <string>

#include "tai/error.hpp"

namespace tai {

std::size_t AdapterShape::layer_input(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden.at(layer - 1);
}

std::size_t AdapterShape::layer_output(std::size_t layer) const {
    return layer < hidden.size() ? hidden[layer] : num_labels;
}

std::size_t AdapterShape::parameter_count() const {
    std::size_t total = 0;
    for (std::size_t k = 0; k < layer_count(); ++k) total += layer_input(k) * layer_output(k) + layer_output(k);
    return total;
}

void AdapterShape::validate() const {
    if (input_dim == 0) throw Error(ErrorCode::invalid_dimension, "adapter input dimension must be >= 1");
    if (num_labels == 0) throw Error(ErrorCode::invalid_dimension, "adapter label count must be >= 1");
    for (auto h : hidden)
        if (h == 0) throw Error(ErrorCode::invalid_dimension, "adapter hidden sizes must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::invalid_config, "dropout must be in [0, 1)");
}

AdapterParams AdapterParams::zeros(const AdapterShape& shape) {
    shape.validate();
    AdapterParams p;
    p.shape = shape;
    for (std::size_t k = 0; k < shape.layer_count(); ++k) {
        AdapterLayer layer;
        layer.weight = DenseMatrix(shape.layer_output(k), shape.layer_input(k));
        layer.bias.assign(shape.layer_output(k), 0.0);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

bool AdapterParams::all_finite() const {
    for (const auto& layer : layers) {
        for (double v : layer.weight.flat())
            if (!std::isfinite(v)) return false;
        for (double v : layer.bias)
            if (!std::isfinite(v)) return false;
    }
    return true;
}

void AdapterParams::round_to_float() {
    for (auto& layer : layers) {
        for (auto& v : layer.weight.flat()) v = static_cast<double>(static_cast<float>(v));
        for (auto& v : layer.bias) v = static_cast<double>(static_cast<float>(v));
    }
}

}  // namespace tai
