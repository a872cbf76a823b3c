#include "flaprl/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "flaprl/error.hpp"
#include "flaprl/rng.hpp"
#include "ops.hpp"

namespace flaprl::nn {

using detail::Ops;
using detail::Trans;

std::vector<LayerPlan> plan_architecture(const Architecture& arch) {
    if (arch.input.height < 1 || arch.input.width < 1 || arch.input.channels < 1) {
        throw DimensionError("network input dimensions must be positive");
    }
    if (arch.trunk.empty() && arch.heads.empty()) throw DimensionError("network has no layers");

    std::vector<LayerPlan> plan;
    std::size_t offset = 0;
    int convs = 0;
    int denses = 0;

    auto add = [&](const LayerSpec& spec, Shape in, int head, const std::string& name) {
        spec.validate();
        LayerPlan p;
        p.spec = spec;
        p.in = in;
        p.head = head;
        switch (spec.kind) {
            case LayerKind::conv2d:
                p.out = conv_output_shape(in, spec.kernel, spec.stride, spec.filters);
                p.weight_dims = {static_cast<std::uint32_t>(spec.filters), static_cast<std::uint32_t>(spec.kernel),
                                 static_cast<std::uint32_t>(spec.kernel), static_cast<std::uint32_t>(in.channels)};
                p.weight_count = static_cast<std::size_t>(spec.filters) * spec.kernel * spec.kernel * in.channels;
                p.bias_count = static_cast<std::size_t>(spec.filters);
                break;
            case LayerKind::dense:
                p.out = {1, 1, spec.units};
                p.weight_dims = {static_cast<std::uint32_t>(spec.units), static_cast<std::uint32_t>(in.size())};
                p.weight_count = static_cast<std::size_t>(spec.units) * in.size();
                p.bias_count = static_cast<std::size_t>(spec.units);
                break;
            case LayerKind::relu:
            case LayerKind::sigmoid:
                p.out = in;
                break;
        }
        if (spec.has_parameters()) {
            p.name = name;
            p.weight_offset = offset;
            offset += p.weight_count;
            p.bias_offset = offset;
            offset += p.bias_count;
        }
        plan.push_back(std::move(p));
        return plan.back().out;
    };

    Shape shape = arch.input;
    for (const LayerSpec& spec : arch.trunk) {
        std::string name;
        if (spec.kind == LayerKind::conv2d) name = "conv" + std::to_string(++convs);
        if (spec.kind == LayerKind::dense) name = "fc" + std::to_string(++denses);
        shape = add(spec, shape, -1, name);
    }
    const Shape trunk_out = shape;
    for (std::size_t h = 0; h < arch.heads.size(); ++h) {
        const Head& head = arch.heads[h];
        const auto parametric = std::count_if(head.layers.begin(), head.layers.end(),
                                              [](const LayerSpec& s) { return s.has_parameters(); });
        if (head.layers.empty()) throw DimensionError("head '" + head.name + "' has no layers");
        Shape s = trunk_out;
        int index = 0;
        for (const LayerSpec& spec : head.layers) {
            std::string name = head.name;
            if (spec.has_parameters() && parametric > 1) name += std::to_string(++index);
            s = add(spec, s, static_cast<int>(h), name);
        }
    }
    return plan;
}

namespace {

std::size_t total_parameters(const std::vector<LayerPlan>& plan) {
    std::size_t n = 0;
    for (const LayerPlan& p : plan) n += p.weight_count + p.bias_count;
    return n;
}

// Index of the layer feeding layer l, or -1 for the network input.
int source_layer(const std::vector<LayerPlan>& plan, std::size_t l) {
    if (l == 0) return -1;
    if (plan[l].head == plan[l - 1].head) return static_cast<int>(l) - 1;
    // First layer of a head: fed by the last trunk layer.
    int last_trunk = -1;
    for (std::size_t i = 0; i < plan.size() && plan[i].head == -1; ++i) last_trunk = static_cast<int>(i);
    return last_trunk;
}

int last_trunk_layer(const std::vector<LayerPlan>& plan) {
    int last = -1;
    for (std::size_t i = 0; i < plan.size() && plan[i].head == -1; ++i) last = static_cast<int>(i);
    return last;
}

int head_last_layer(const std::vector<LayerPlan>& plan, int head) {
    int last = -1;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        if (plan[i].head == head) last = static_cast<int>(i);
    }
    return last;
}

template <class T>
const T* layer_input(const std::vector<LayerPlan>& plan, const ForwardCache<T>& cache, std::size_t l) {
    const int src = source_layer(plan, l);
    return src < 0 ? cache.input.data() : cache.outputs[static_cast<std::size_t>(src)].data();
}

template <class T>
T sigmoid(T x) {
    const T y = x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
    // Keep the output inside the open interval at the precision limit.
    constexpr T lo = std::numeric_limits<T>::min();
    constexpr T hi = T(1) - std::numeric_limits<T>::epsilon() / T(2);
    return std::clamp(y, lo, hi);
}

template <class T>
void im2col(const T* x, const LayerPlan& p, int batch, T* patches) {
    const int k = p.spec.kernel;
    const int s = p.spec.stride;
    const int c = p.in.channels;
    const std::size_t row_len = static_cast<std::size_t>(k) * c;
    const std::size_t kkc = row_len * k;
    std::size_t row = 0;
    for (int b = 0; b < batch; ++b) {
        const T* sample = x + static_cast<std::size_t>(b) * p.in.size();
        for (int oy = 0; oy < p.out.height; ++oy) {
            for (int ox = 0; ox < p.out.width; ++ox, ++row) {
                T* dst = patches + row * kkc;
                for (int ky = 0; ky < k; ++ky) {
                    const T* src =
                        sample + (static_cast<std::size_t>(oy * s + ky) * p.in.width + static_cast<std::size_t>(ox) * s) * c;
                    std::copy(src, src + row_len, dst + static_cast<std::size_t>(ky) * row_len);
                }
            }
        }
    }
}

template <class T>
void col2im(const T* dpatches, const LayerPlan& p, int batch, T* dx) {
    const int k = p.spec.kernel;
    const int s = p.spec.stride;
    const int c = p.in.channels;
    const std::size_t row_len = static_cast<std::size_t>(k) * c;
    const std::size_t kkc = row_len * k;
    std::fill(dx, dx + static_cast<std::size_t>(batch) * p.in.size(), T(0));
    std::size_t row = 0;
    for (int b = 0; b < batch; ++b) {
        T* sample = dx + static_cast<std::size_t>(b) * p.in.size();
        for (int oy = 0; oy < p.out.height; ++oy) {
            for (int ox = 0; ox < p.out.width; ++ox, ++row) {
                const T* src = dpatches + row * kkc;
                for (int ky = 0; ky < k; ++ky) {
                    T* dst = sample + (static_cast<std::size_t>(oy * s + ky) * p.in.width + static_cast<std::size_t>(ox) * s) * c;
                    const T* srow = src + static_cast<std::size_t>(ky) * row_len;
                    for (std::size_t i = 0; i < row_len; ++i) dst[i] += srow[i];
                }
            }
        }
    }
}

template <class T>
void layer_forward(const Network<T>& net, std::size_t l, const T* x, int batch, ForwardCache<T>& cache) {
    const LayerPlan& p = net.plan()[l];
    std::vector<T>& y = cache.outputs[l];
    y.resize(static_cast<std::size_t>(batch) * p.out.size());
    switch (p.spec.kind) {
        case LayerKind::conv2d: {
            const int m = batch * p.out.height * p.out.width;
            const int kkc = p.spec.kernel * p.spec.kernel * p.in.channels;
            std::vector<T>& patches = cache.patches[l];
            patches.resize(static_cast<std::size_t>(m) * kkc);
            im2col(x, p, batch, patches.data());
            Ops<T>::gemm(Trans::no, Trans::yes, m, p.spec.filters, kkc, patches.data(), kkc,
                         net.weights(l).data(), kkc, T(0), y.data(), p.spec.filters);
            Ops<T>::add_bias(y.data(), net.bias(l).data(), m, p.spec.filters);
            break;
        }
        case LayerKind::dense: {
            const int in = static_cast<int>(p.in.size());
            Ops<T>::gemm(Trans::no, Trans::yes, batch, p.spec.units, in, x, in, net.weights(l).data(), in, T(0),
                         y.data(), p.spec.units);
            Ops<T>::add_bias(y.data(), net.bias(l).data(), batch, p.spec.units);
            break;
        }
        case LayerKind::relu:
            Ops<T>::relu(x, y.data(), y.size());
            break;
        case LayerKind::sigmoid:
            for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid(x[i]);
            break;
    }
}

// dy -> parameter gradients (into grads) and, when dx is non-null, dx.
template <class T>
void layer_backward(const Network<T>& net, std::size_t l, ForwardCache<T>& cache, const T* dy, T* dx,
                    Gradients<T>& grads) {
    const LayerPlan& p = net.plan()[l];
    const int batch = cache.batch;
    const std::vector<T>& y = cache.outputs[l];
    switch (p.spec.kind) {
        case LayerKind::conv2d: {
            const int m = batch * p.out.height * p.out.width;
            const int f = p.spec.filters;
            const int kkc = p.spec.kernel * p.spec.kernel * p.in.channels;
            const std::vector<T>& patches = cache.patches[l];
            T* dw = grads.values.data() + p.weight_offset;
            T* db = grads.values.data() + p.bias_offset;
            Ops<T>::gemm(Trans::yes, Trans::no, f, kkc, m, dy, f, patches.data(), kkc, T(0), dw, kkc);
            Ops<T>::column_sums(dy, db, m, f);
            if (dx != nullptr) {
                std::vector<T>& dpatches = cache.scratch[2];
                dpatches.resize(static_cast<std::size_t>(m) * kkc);
                Ops<T>::gemm(Trans::no, Trans::no, m, kkc, f, dy, f, net.weights(l).data(), kkc, T(0),
                             dpatches.data(), kkc);
                col2im(dpatches.data(), p, batch, dx);
            }
            break;
        }
        case LayerKind::dense: {
            const int in = static_cast<int>(p.in.size());
            const int out = p.spec.units;
            const T* x = layer_input(net.plan(), cache, l);
            T* dw = grads.values.data() + p.weight_offset;
            T* db = grads.values.data() + p.bias_offset;
            Ops<T>::gemm(Trans::yes, Trans::no, out, in, batch, dy, out, x, in, T(0), dw, in);
            Ops<T>::column_sums(dy, db, batch, out);
            if (dx != nullptr) {
                Ops<T>::gemm(Trans::no, Trans::no, batch, in, out, dy, out, net.weights(l).data(), in, T(0), dx, in);
            }
            break;
        }
        case LayerKind::relu:
            if (dx != nullptr) Ops<T>::relu_backward(y.data(), dy, dx, y.size());
            break;
        case LayerKind::sigmoid:
            if (dx != nullptr) {
                for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * y[i] * (T(1) - y[i]);
            }
            break;
    }
}

}  // namespace

template <class T>
Network<T>::Network(Architecture arch)
    : arch_(std::move(arch)), plan_(plan_architecture(arch_)), params_(total_parameters(plan_), T(0)) {}

template <class T>
std::span<T> Network<T>::weights(std::size_t l) {
    const LayerPlan& p = plan_.at(l);
    return std::span<T>(params_).subspan(p.weight_offset, p.weight_count);
}

template <class T>
std::span<const T> Network<T>::weights(std::size_t l) const {
    const LayerPlan& p = plan_.at(l);
    return std::span<const T>(params_).subspan(p.weight_offset, p.weight_count);
}

template <class T>
std::span<T> Network<T>::bias(std::size_t l) {
    const LayerPlan& p = plan_.at(l);
    return std::span<T>(params_).subspan(p.bias_offset, p.bias_count);
}

template <class T>
std::span<const T> Network<T>::bias(std::size_t l) const {
    const LayerPlan& p = plan_.at(l);
    return std::span<const T>(params_).subspan(p.bias_offset, p.bias_count);
}

template <class T>
std::size_t Network<T>::output_size(int head) const {
    const int last = arch_.heads.empty() ? last_trunk_layer(plan_) : head_last_layer(plan_, head);
    if (last < 0) throw DimensionError("no such output head");
    return plan_[static_cast<std::size_t>(last)].out.size();
}

template class Network<float>;
template class Network<double>;

template <class T>
void forward_into(const Network<T>& net, std::span<const T> input, int batch, ForwardCache<T>& cache) {
    if (batch < 1) throw DimensionError("batch must be >= 1");
    if (input.size() != static_cast<std::size_t>(batch) * net.input_size()) {
        throw DimensionError("input has " + std::to_string(input.size()) + " values, expected " +
                             std::to_string(static_cast<std::size_t>(batch) * net.input_size()));
    }
    const auto& plan = net.plan();
    cache.parameter_count = net.parameter_count();
    cache.layer_count = plan.size();
    cache.batch = batch;
    cache.input.assign(input.begin(), input.end());
    cache.outputs.resize(plan.size());
    cache.patches.resize(plan.size());
    cache.scratch.resize(4);
    for (std::size_t l = 0; l < plan.size(); ++l) {
        layer_forward(net, l, layer_input(plan, cache, l), batch, cache);
    }
    for (int h = 0; h < net.head_count(); ++h) {
        for (T v : head_output(net, cache, h)) {
            if (!std::isfinite(v)) throw NumericError("non-finite network output");
        }
    }
}

template <class T>
std::span<const T> head_output(const Network<T>& net, const ForwardCache<T>& cache, int head) {
    const auto& plan = net.plan();
    const int last = net.architecture().heads.empty() ? last_trunk_layer(plan) : head_last_layer(plan, head);
    if (last < 0) throw DimensionError("no such output head");
    return cache.outputs[static_cast<std::size_t>(last)];
}

template <class T>
ForwardResult<T> forward(const Network<T>& net, std::span<const T> input, int batch) {
    ForwardResult<T> r;
    forward_into(net, input, batch, r.cache);
    for (int h = 0; h < net.head_count(); ++h) {
        auto out = head_output(net, r.cache, h);
        r.outputs.push_back(Tensor<T>{{static_cast<std::size_t>(batch), out.size() / batch},
                                      std::vector<T>(out.begin(), out.end())});
    }
    return r;
}

template <class T>
void backward_into(const Network<T>& net, ForwardCache<T>& cache,
                   const std::vector<std::span<const T>>& output_gradients, Gradients<T>& grads,
                   std::vector<T>* input_gradient) {
    const auto& plan = net.plan();
    if (cache.parameter_count != net.parameter_count() || cache.layer_count != plan.size() || cache.batch < 1 ||
        cache.outputs.size() != plan.size()) {
        throw ConsistencyError("forward cache does not match this network");
    }
    const int batch = cache.batch;
    if (output_gradients.size() != static_cast<std::size_t>(net.head_count())) {
        throw DimensionError("expected one output gradient per head");
    }
    for (int h = 0; h < net.head_count(); ++h) {
        if (output_gradients[h].size() != static_cast<std::size_t>(batch) * net.output_size(h)) {
            throw DimensionError("output gradient size mismatch for head " + std::to_string(h));
        }
    }
    grads.values.assign(net.parameter_count(), T(0));
    cache.scratch.resize(4);

    std::vector<T>& ping = cache.scratch[0];
    std::vector<T>& pong = cache.scratch[1];
    std::vector<T>& trunk_grad = cache.scratch[3];
    const int trunk_last = last_trunk_layer(plan);
    const std::size_t trunk_out_size =
        static_cast<std::size_t>(batch) * (trunk_last < 0 ? net.input_size() : plan[trunk_last].out.size());

    if (net.architecture().heads.empty()) {
        trunk_grad.assign(output_gradients[0].begin(), output_gradients[0].end());
    } else {
        trunk_grad.assign(trunk_out_size, T(0));
        for (int h = 0; h < net.head_count(); ++h) {
            ping.assign(output_gradients[h].begin(), output_gradients[h].end());
            for (int l = head_last_layer(plan, h); l >= 0 && plan[l].head == h; --l) {
                pong.resize(static_cast<std::size_t>(batch) * plan[l].in.size());
                layer_backward(net, static_cast<std::size_t>(l), cache, ping.data(), pong.data(), grads);
                std::swap(ping, pong);
            }
            for (std::size_t i = 0; i < trunk_out_size; ++i) trunk_grad[i] += ping[i];
        }
    }

    ping.swap(trunk_grad);
    for (int l = trunk_last; l >= 0; --l) {
        const bool need_dx = l > 0 || input_gradient != nullptr;
        pong.resize(static_cast<std::size_t>(batch) * plan[l].in.size());
        layer_backward(net, static_cast<std::size_t>(l), cache, ping.data(), need_dx ? pong.data() : nullptr, grads);
        std::swap(ping, pong);
    }
    if (input_gradient != nullptr) input_gradient->assign(ping.begin(), ping.end());
}

template <class T>
BackwardResult<T> backward(const Network<T>& net, ForwardCache<T>& cache,
                           const std::vector<std::span<const T>>& output_gradients) {
    BackwardResult<T> r;
    backward_into(net, cache, output_gradients, r.gradients, &r.input_gradient);
    return r;
}

template <class T>
Network<T> init_network(const Architecture& arch, std::uint64_t seed) {
    Network<T> net(arch);
    Rng rng(seed);
    const auto& plan = net.plan();
    for (std::size_t l = 0; l < plan.size(); ++l) {
        const LayerPlan& p = plan[l];
        if (!p.spec.has_parameters()) continue;
        const std::size_t fan_in = p.weight_count / p.bias_count;
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (T& w : net.weights(l)) w = static_cast<T>((2.0 * rng.uniform() - 1.0) * limit);
    }
    return net;
}

#define FLAPRL_INSTANTIATE(T)                                                                                    \
    template void forward_into<T>(const Network<T>&, std::span<const T>, int, ForwardCache<T>&);                 \
    template std::span<const T> head_output<T>(const Network<T>&, const ForwardCache<T>&, int);                  \
    template ForwardResult<T> forward<T>(const Network<T>&, std::span<const T>, int);                            \
    template void backward_into<T>(const Network<T>&, ForwardCache<T>&, const std::vector<std::span<const T>>&, \
                                   Gradients<T>&, std::vector<T>*);                                              \
    template BackwardResult<T> backward<T>(const Network<T>&, ForwardCache<T>&,                                  \
                                           const std::vector<std::span<const T>>&);                              \
    template Network<T> init_network<T>(const Architecture&, std::uint64_t);

FLAPRL_INSTANTIATE(float)
FLAPRL_INSTANTIATE(double)

#undef FLAPRL_INSTANTIATE

}  // namespace flaprl::nn
