#include "amnce/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace amnce {

void Dataset::validate() const {
    if (examples.rank() != 2 || examples.rows() == 0) {
        throw std::runtime_error("dataset: examples must be a nonempty [n, D] tensor");
    }
    for (double v : examples.data) {
        if (!(v >= -1.0 && v <= 1.0)) throw std::runtime_error("dataset: value outside [-1, 1]");
    }
    if (labels && labels->size() != examples.rows()) {
        throw std::runtime_error("dataset: label count does not match example count");
    }
}

Dataset Dataset::filter_label(int label, bool keep) const {
    if (!labels) throw std::runtime_error("dataset: filter requires labels");
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < size(); ++i) {
        if (((*labels)[i] == label) == keep) rows.push_back(i);
    }
    if (rows.empty()) throw std::runtime_error("dataset: filter produced an empty dataset");
    Dataset out;
    out.examples = Tensor({rows.size(), dim()});
    out.labels = std::vector<int>(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t j = 0; j < dim(); ++j) out.examples.at(r, j) = examples.at(rows[r], j);
        (*out.labels)[r] = (*labels)[rows[r]];
    }
    return out;
}

Dataset Dataset::slice(std::size_t start, std::size_t count) const {
    if (start + count > size()) throw std::runtime_error("dataset: slice out of range");
    Dataset out;
    out.examples = Tensor({count, dim()});
    for (std::size_t r = 0; r < count; ++r) {
        for (std::size_t j = 0; j < dim(); ++j) out.examples.at(r, j) = examples.at(start + r, j);
    }
    if (labels) {
        out.labels = std::vector<int>(labels->begin() + static_cast<std::ptrdiff_t>(start),
                                      labels->begin() + static_cast<std::ptrdiff_t>(start + count));
    }
    return out;
}

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_be_u32(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error(std::string("idx: truncated ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw std::runtime_error("idx: cannot open " + images_path);

    const std::uint32_t magic = read_be_u32(in, "magic");
    if (magic != kImagesMagic) throw std::runtime_error("idx: bad image magic in " + images_path);
    const std::uint64_t count = read_be_u32(in, "count");
    const std::uint64_t rows = read_be_u32(in, "rows");
    const std::uint64_t cols = read_be_u32(in, "cols");
    if (count == 0 || rows == 0 || cols == 0) throw std::runtime_error("idx: empty dimension in header");
    const std::uint64_t pixels = rows * cols;
    if (pixels > (1u << 24) || count > (1u << 28) || count * pixels > (1ull << 32)) {
        throw std::runtime_error("idx: header dimensions overflow sanity bounds");
    }

    std::vector<unsigned char> buf(count * pixels);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::uint64_t>(in.gcount()) != buf.size()) {
        throw std::runtime_error("idx: truncated pixel payload in " + images_path);
    }

    Dataset ds;
    ds.examples = Tensor({static_cast<std::size_t>(count), static_cast<std::size_t>(pixels)});
    for (std::size_t i = 0; i < buf.size(); ++i) {
        ds.examples.data[i] = static_cast<double>(buf[i]) / 127.5 - 1.0;
    }

    if (!labels_path.empty()) {
        std::ifstream lin(labels_path, std::ios::binary);
        if (!lin) throw std::runtime_error("idx: cannot open " + labels_path);
        const std::uint32_t lmagic = read_be_u32(lin, "label magic");
        if (lmagic != kLabelsMagic) throw std::runtime_error("idx: bad label magic in " + labels_path);
        const std::uint64_t lcount = read_be_u32(lin, "label count");
        if (lcount != count) throw std::runtime_error("idx: label count does not match image count");
        std::vector<unsigned char> lbuf(lcount);
        lin.read(reinterpret_cast<char*>(lbuf.data()), static_cast<std::streamsize>(lbuf.size()));
        if (static_cast<std::uint64_t>(lin.gcount()) != lbuf.size()) {
            throw std::runtime_error("idx: truncated label payload in " + labels_path);
        }
        ds.labels = std::vector<int>(lbuf.begin(), lbuf.end());
    }
    return ds;
}

namespace {
double clip_unit(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }
}  // namespace

Dataset synth_dataset(SynthKind kind, std::size_t n, Rng& rng, const SynthParams& params) {
    if (n == 0) throw std::runtime_error("synth: n must be positive");
    Dataset ds;
    ds.examples = Tensor({n, 2});
    switch (kind) {
        case SynthKind::GaussianGrid: {
            const std::size_t g = params.grid_size;
            if (g == 0) throw std::runtime_error("synth: grid_size must be positive");
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t cell = rng.uniform_index(g * g);
                const double cx = g == 1 ? 0.0 : -0.6 + 1.2 * static_cast<double>(cell % g) / (g - 1);
                const double cy = g == 1 ? 0.0 : -0.6 + 1.2 * static_cast<double>(cell / g) / (g - 1);
                ds.examples.at(i, 0) = clip_unit(cx + params.grid_std * rng.normal());
                ds.examples.at(i, 1) = clip_unit(cy + params.grid_std * rng.normal());
            }
            break;
        }
        case SynthKind::TwoSpirals: {
            for (std::size_t i = 0; i < n; ++i) {
                const double t = params.spiral_turns * 2.0 * std::numbers::pi * rng.uniform();
                const double r = 0.85 * t / (params.spiral_turns * 2.0 * std::numbers::pi);
                const double arm = (rng.uniform() < 0.5) ? 0.0 : std::numbers::pi;
                ds.examples.at(i, 0) = clip_unit(r * std::cos(t + arm) + params.spiral_noise * rng.normal());
                ds.examples.at(i, 1) = clip_unit(r * std::sin(t + arm) + params.spiral_noise * rng.normal());
            }
            break;
        }
        case SynthKind::Ring: {
            for (std::size_t i = 0; i < n; ++i) {
                const double angle = 2.0 * std::numbers::pi * rng.uniform();
                const double radius = params.ring_radius + params.ring_std * rng.normal();
                ds.examples.at(i, 0) = clip_unit(radius * std::cos(angle));
                ds.examples.at(i, 1) = clip_unit(radius * std::sin(angle));
            }
            break;
        }
    }
    return ds;
}

SynthKind parse_synth_kind(const std::string& name) {
    if (name == "gaussian_grid") return SynthKind::GaussianGrid;
    if (name == "two_spirals") return SynthKind::TwoSpirals;
    if (name == "ring") return SynthKind::Ring;
    throw std::runtime_error("synth: unknown kind '" + name + "'");
}

std::string synth_kind_name(SynthKind kind) {
    switch (kind) {
        case SynthKind::GaussianGrid: return "gaussian_grid";
        case SynthKind::TwoSpirals: return "two_spirals";
        case SynthKind::Ring: return "ring";
    }
    return "ring";
}

void emit_samples_pgm(const Tensor& images, std::size_t width, std::size_t height, std::size_t grid_cols,
                      const std::string& path) {
    if (images.rank() != 2 || images.cols() != width * height) {
        throw std::runtime_error("pgm: image width*height does not match data dimension");
    }
    if (grid_cols == 0) throw std::runtime_error("pgm: grid_cols must be positive");
    const std::size_t k = images.rows();
    const std::size_t grid_rows = (k + grid_cols - 1) / grid_cols;
    const std::size_t canvas_w = grid_cols * width;
    const std::size_t canvas_h = grid_rows * height;

    std::vector<unsigned char> canvas(canvas_w * canvas_h, 0);
    for (std::size_t img = 0; img < k; ++img) {
        const std::size_t cell_r = img / grid_cols;
        const std::size_t cell_c = img % grid_cols;
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const double v = images.at(img, y * width + x);
                const double scaled = std::lround((clip_unit(v) + 1.0) * 127.5);
                canvas[(cell_r * height + y) * canvas_w + cell_c * width + x] =
                    static_cast<unsigned char>(scaled < 0 ? 0 : (scaled > 255 ? 255 : scaled));
            }
        }
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot open " + path + " for writing");
    out << "P5\n" << canvas_w << " " << canvas_h << "\n255\n";
    out.write(reinterpret_cast<const char*>(canvas.data()), static_cast<std::streamsize>(canvas.size()));
    if (!out) throw std::runtime_error("pgm: write failed for " + path);
}

}  // namespace amnce
