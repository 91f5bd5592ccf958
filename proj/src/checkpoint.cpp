#include "amnce/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace amnce {

namespace {

void write_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

void write_f64(std::ostream& out, double v) { write_u64(out, std::bit_cast<std::uint64_t>(v)); }

void write_string(std::ostream& out, const std::string& s) {
    write_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_tensor(std::ostream& out, const Tensor& t) {
    write_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape) write_u64(out, e);
    for (double v : t.data) write_f64(out, v);
}

void write_mlp(std::ostream& out, const Mlp& net) {
    write_u32(out, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& l : net.layers) {
        write_u32(out, static_cast<std::uint32_t>(l.activation));
        write_f64(out, l.leaky_slope);
        write_tensor(out, l.weight);
        write_tensor(out, l.bias);
    }
}

void write_adam(std::ostream& out, const AdamState& a) {
    write_u64(out, a.step_count);
    write_f64(out, a.lr);
    write_f64(out, a.beta1);
    write_f64(out, a.beta2);
    write_f64(out, a.eps);
    write_u32(out, static_cast<std::uint32_t>(a.first_moment.size()));
    for (const auto& t : a.first_moment) write_tensor(out, t);
    for (const auto& t : a.second_moment) write_tensor(out, t);
}

std::uint8_t read_u8(std::istream& in) {
    const int c = in.get();
    if (c == EOF) throw std::runtime_error("checkpoint: truncated file");
    return static_cast<std::uint8_t>(c);
}

std::uint32_t read_u32(std::istream& in) {
    char b[4];
    in.read(b, 4);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    char b[8];
    in.read(b, 8);
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

std::string read_string(std::istream& in) {
    const std::uint64_t len = read_u64(in);
    if (len > (1ull << 30)) throw std::runtime_error("checkpoint: implausible string length");
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

Tensor read_tensor(std::istream& in) {
    const std::uint32_t rank = read_u32(in);
    if (rank > 4) throw std::runtime_error("checkpoint: implausible tensor rank");
    std::vector<std::size_t> shape(rank);
    std::size_t total = 1;
    for (auto& e : shape) {
        e = static_cast<std::size_t>(read_u64(in));
        if (e > (1ull << 32)) throw std::runtime_error("checkpoint: implausible tensor extent");
        total *= e;
    }
    if (total > (1ull << 30)) throw std::runtime_error("checkpoint: implausible tensor size");
    Tensor t(std::move(shape));
    for (double& v : t.data) v = read_f64(in);
    return t;
}

Mlp read_mlp(std::istream& in) {
    const std::uint32_t n_layers = read_u32(in);
    if (n_layers == 0 || n_layers > 64) throw std::runtime_error("checkpoint: implausible layer count");
    Mlp net;
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        LinearLayer l;
        const std::uint32_t act = read_u32(in);
        if (act > 2) throw std::runtime_error("checkpoint: unknown activation code");
        l.activation = static_cast<Activation>(act);
        l.leaky_slope = read_f64(in);
        l.weight = read_tensor(in);
        l.bias = read_tensor(in);
        net.layers.push_back(std::move(l));
    }
    net.validate();
    return net;
}

AdamState read_adam(std::istream& in, const std::vector<const Tensor*>& params) {
    AdamState a;
    a.step_count = static_cast<std::size_t>(read_u64(in));
    a.lr = read_f64(in);
    a.beta1 = read_f64(in);
    a.beta2 = read_f64(in);
    a.eps = read_f64(in);
    const std::uint32_t n = read_u32(in);
    if (n != params.size()) throw std::runtime_error("checkpoint: optimizer moment count mismatch");
    a.first_moment.reserve(n);
    a.second_moment.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) a.first_moment.push_back(read_tensor(in));
    for (std::uint32_t i = 0; i < n; ++i) a.second_moment.push_back(read_tensor(in));
    for (std::uint32_t i = 0; i < n; ++i) {
        if (!a.first_moment[i].same_shape(*params[i]) || !a.second_moment[i].same_shape(*params[i])) {
            throw std::runtime_error("checkpoint: optimizer moment shape mismatch");
        }
    }
    return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    const auto& s = ckpt.state;

    out.write(kCheckpointMagic, 4);
    write_u32(out, kCheckpointVersion);
    write_string(out, ckpt.config_echo);
    write_u64(out, s.iteration);
    write_u8(out, s.has_current_estimator ? 1 : 0);
    write_u8(out, s.finalized ? 1 : 0);
    write_u8(out, s.memory_snapshot.has_value() ? 1 : 0);

    write_mlp(out, s.generator.decoder);
    write_f64(out, s.generator.sigma);

    write_u64(out, s.prior.latent_dim);
    write_u32(out, static_cast<std::uint32_t>(s.prior.num_stages()));
    for (const auto& stage : s.prior.stages) write_mlp(out, stage.net);

    if (s.has_current_estimator) write_mlp(out, s.current_estimator.net);

    write_adam(out, s.adam_generator);
    write_adam(out, s.adam_ratio);

    write_tensor(out, s.memory_samples);
    if (s.memory_snapshot) write_tensor(out, *s.memory_snapshot);

    write_string(out, s.rng_state);
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }

    Checkpoint ckpt;
    auto& s = ckpt.state;
    ckpt.config_echo = read_string(in);
    s.iteration = read_u64(in);
    s.has_current_estimator = read_u8(in) != 0;
    s.finalized = read_u8(in) != 0;
    const bool has_snapshot = read_u8(in) != 0;

    s.generator.decoder = read_mlp(in);
    s.generator.sigma = read_f64(in);
    if (s.generator.sigma <= 0.0) throw std::runtime_error("checkpoint: invalid sigma");

    s.prior.latent_dim = static_cast<std::size_t>(read_u64(in));
    const std::uint32_t n_stages = read_u32(in);
    if (n_stages > 1024) throw std::runtime_error("checkpoint: implausible stage count");
    for (std::uint32_t i = 0; i < n_stages; ++i) {
        RatioEstimator est;
        est.net = read_mlp(in);
        est.frozen = true;
        if (est.latent_dim() != s.prior.latent_dim) {
            throw std::runtime_error("checkpoint: stage latent dim mismatch");
        }
        s.prior.stages.push_back(std::move(est));
    }

    if (s.has_current_estimator) {
        s.current_estimator.net = read_mlp(in);
        s.current_estimator.frozen = false;
    }

    s.adam_generator = read_adam(in, std::as_const(s.generator.decoder).params());
    std::vector<const Tensor*> ratio_params;
    if (s.has_current_estimator) ratio_params = std::as_const(s.current_estimator.net).params();
    s.adam_ratio = read_adam(in, ratio_params);

    s.memory_samples = read_tensor(in);
    if (s.memory_samples.rank() != 2 || s.memory_samples.cols() != s.prior.latent_dim) {
        throw std::runtime_error("checkpoint: memory shape mismatch");
    }
    if (has_snapshot) {
        Tensor snap = read_tensor(in);
        if (!snap.same_shape(s.memory_samples)) throw std::runtime_error("checkpoint: snapshot shape mismatch");
        s.memory_snapshot = std::move(snap);
    }

    s.rng_state = read_string(in);
    return ckpt;
}

}  // namespace amnce
