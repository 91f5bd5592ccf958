#include "amnce/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace amnce {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        const long long v = std::stoll(value);
        if (v < 0) throw std::out_of_range("negative");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' expects a non-negative integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' expects a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw std::runtime_error("config: key '" + key + "' expects a boolean, got '" + value + "'");
}

std::vector<std::size_t> parse_dims(const std::string& key, const std::string& value) {
    std::vector<std::size_t> dims;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        dims.push_back(parse_size(key, item));
    }
    if (dims.empty()) throw std::runtime_error("config: key '" + key + "' expects comma-separated dims");
    return dims;
}

std::string dims_string(const std::vector<std::size_t>& dims) {
    std::ostringstream os;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) os << ",";
        os << dims[i];
    }
    return os.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "dataset") dataset = value;
    else if (key == "idx_images") idx_images = value;
    else if (key == "idx_labels") idx_labels = value;
    else if (key == "synth_n") synth_n = parse_size(key, value);
    else if (key == "data_seed") data_seed = parse_size(key, value);
    else if (key == "heldout_label") heldout_label = static_cast<int>(parse_double(key, value));
    else if (key == "image_width") image_width = parse_size(key, value);
    else if (key == "image_height") image_height = parse_size(key, value);
    else if (key == "latent_dim") train.latent_dim = parse_size(key, value);
    else if (key == "batch_size") train.batch_size = parse_size(key, value);
    else if (key == "lr_generator") train.lr_generator = parse_double(key, value);
    else if (key == "lr_ratio") train.lr_ratio = parse_double(key, value);
    else if (key == "posterior_steps") train.posterior_ld.num_steps = parse_size(key, value);
    else if (key == "posterior_step_size") train.posterior_ld.step_size = parse_double(key, value);
    else if (key == "prior_steps") train.prior_ld.num_steps = parse_size(key, value);
    else if (key == "prior_step_size") train.prior_ld.step_size = parse_double(key, value);
    else if (key == "prior_sample_mode") {
        if (value == "persistent") train.prior_mode = PriorMode::Persistent;
        else if (value == "langevin") train.prior_mode = PriorMode::Langevin;
        else throw std::runtime_error("config: prior_sample_mode must be persistent or langevin");
    } else if (key == "posterior_init") {
        if (value == "noise") train.posterior_init = PosteriorInitMode::Noise;
        else if (value == "warm") train.posterior_init = PosteriorInitMode::Warm;
        else throw std::runtime_error("config: posterior_init must be noise or warm");
    } else if (key == "adaptive") train.adaptive = parse_bool(key, value);
    else if (key == "sigma") train.sigma = parse_double(key, value);
    else if (key == "seed") {
        train.seed = parse_size(key, value);
        seed_given = true;
    } else if (key == "decoder_hidden") train.decoder_hidden = parse_dims(key, value);
    else if (key == "decoder_leaky_slope") train.decoder_slope = parse_double(key, value);
    else if (key == "estimator_hidden") train.estimator_hidden = parse_dims(key, value);
    else if (key == "estimator_leaky_slope") train.estimator_slope = parse_double(key, value);
    else if (key == "epochs") epochs = parse_size(key, value);
    else if (key == "iters") iters = parse_size(key, value);
    else if (key == "stages") stages = parse_size(key, value);
    else if (key == "test_prior_steps") test_prior_ld.num_steps = parse_size(key, value);
    else if (key == "test_prior_step_size") test_prior_ld.step_size = parse_double(key, value);
    else if (key == "sir_proposals") sir_proposals = parse_size(key, value);
    else if (key == "anomaly_chains") anomaly_chains = parse_size(key, value);
    else if (key == "output_dir") output_dir = value;
    else throw std::runtime_error("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: line " + std::to_string(lineno) + " is not key = value");
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

std::string RunConfig::serialize() const {
    std::ostringstream os;
    os.precision(17);
    os << "dataset = " << dataset << "\n";
    os << "idx_images = " << idx_images << "\n";
    os << "idx_labels = " << idx_labels << "\n";
    os << "synth_n = " << synth_n << "\n";
    os << "data_seed = " << data_seed << "\n";
    os << "heldout_label = " << heldout_label << "\n";
    os << "image_width = " << image_width << "\n";
    os << "image_height = " << image_height << "\n";
    os << "latent_dim = " << train.latent_dim << "\n";
    os << "batch_size = " << train.batch_size << "\n";
    os << "lr_generator = " << train.lr_generator << "\n";
    os << "lr_ratio = " << train.lr_ratio << "\n";
    os << "posterior_steps = " << train.posterior_ld.num_steps << "\n";
    os << "posterior_step_size = " << train.posterior_ld.step_size << "\n";
    os << "prior_steps = " << train.prior_ld.num_steps << "\n";
    os << "prior_step_size = " << train.prior_ld.step_size << "\n";
    os << "prior_sample_mode = " << (train.prior_mode == PriorMode::Persistent ? "persistent" : "langevin")
       << "\n";
    os << "posterior_init = " << (train.posterior_init == PosteriorInitMode::Noise ? "noise" : "warm")
       << "\n";
    os << "adaptive = " << (train.adaptive ? "true" : "false") << "\n";
    os << "sigma = " << train.sigma << "\n";
    os << "seed = " << train.seed << "\n";
    os << "decoder_hidden = " << dims_string(train.decoder_hidden) << "\n";
    os << "decoder_leaky_slope = " << train.decoder_slope << "\n";
    os << "estimator_hidden = " << dims_string(train.estimator_hidden) << "\n";
    os << "estimator_leaky_slope = " << train.estimator_slope << "\n";
    os << "epochs = " << epochs << "\n";
    os << "iters = " << iters << "\n";
    os << "stages = " << stages << "\n";
    os << "test_prior_steps = " << test_prior_ld.num_steps << "\n";
    os << "test_prior_step_size = " << test_prior_ld.step_size << "\n";
    os << "sir_proposals = " << sir_proposals << "\n";
    os << "anomaly_chains = " << anomaly_chains << "\n";
    os << "output_dir = " << output_dir << "\n";
    return os.str();
}

StageSchedule RunConfig::schedule_for(std::size_t dataset_size) const {
    StageSchedule schedule;
    schedule.num_stages = stages;
    if (iters > 0) {
        schedule.total_iters = iters;
    } else {
        const std::size_t per_epoch = std::max<std::size_t>(1, dataset_size / train.batch_size);
        schedule.total_iters = epochs * per_epoch;
    }
    schedule.validate();
    return schedule;
}

Dataset load_config_dataset(const RunConfig& cfg) {
    Dataset ds;
    if (cfg.dataset == "idx") {
        if (cfg.idx_images.empty()) throw std::runtime_error("config: dataset=idx requires idx_images");
        ds = load_idx(cfg.idx_images, cfg.idx_labels);
    } else if (cfg.dataset.rfind("synth:", 0) == 0) {
        Rng rng(cfg.data_seed);
        ds = synth_dataset(parse_synth_kind(cfg.dataset.substr(6)), cfg.synth_n, rng);
    } else {
        throw std::runtime_error("config: dataset must be 'idx' or 'synth:<kind>'");
    }
    if (cfg.heldout_label >= 0) ds = ds.filter_label(cfg.heldout_label, /*keep=*/false);
    ds.validate();
    return ds;
}

void apply_seed_fallback(RunConfig& cfg) {
    if (cfg.seed_given) return;
    if (const char* env = std::getenv("AMNCE_SEED")) {
        cfg.set("seed", env);
        return;
    }
    cfg.train.seed = 1;
}

}  // namespace amnce
