#include "exqa/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace exqa::config {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

RunConfig RunConfig::from_json_text(const std::string& text) {
    RunConfig cfg;
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config must be a JSON object");

    read_if(j, "seed", cfg.seed);
    read_if(j, "rl_steps", cfg.rl_steps);
    read_if(j, "max_vocab", cfg.max_vocab);
    if (j.contains("rl")) {
        const auto& r = j["rl"];
        read_if(r, "lambda_ml", cfg.rl.lambda_ml);
        read_if(r, "sample_temperature", cfg.rl.sample_temperature);
        read_if(r, "advantage_clip_min", cfg.rl.advantage_clip_min);
        read_if(r, "noisiness_threshold", cfg.rl.noisiness_threshold);
        read_if(r, "max_explanation_tokens", cfg.rl.max_explanation_tokens);
        read_if(r, "rng_seed", cfg.rl.rng_seed);
        if (cfg.rl.sample_temperature <= 0.0) {
            throw std::runtime_error("rl.sample_temperature must be > 0");
        }
        if (cfg.rl.max_explanation_tokens < 1) {
            throw std::runtime_error("rl.max_explanation_tokens must be >= 1");
        }
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        read_if(t, "batch_size", cfg.train.batch_size);
        read_if(t, "learning_rate", cfg.train.learning_rate);
        read_if(t, "optimizer", cfg.train.optimizer);
        read_if(t, "max_epochs", cfg.train.max_epochs);
        read_if(t, "validate_every", cfg.train.validate_every);
        read_if(t, "patience", cfg.train.patience);
        read_if(t, "rng_seed", cfg.train.rng_seed);
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        read_if(m, "embed_dim", cfg.model.embed_dim);
        read_if(m, "hidden_dim", cfg.model.hidden_dim);
        read_if(m, "max_input_tokens", cfg.model.max_input_tokens);
    }
    if (j.contains("ranker")) {
        const auto& r = j["ranker"];
        read_if(r, "k", cfg.ranker.k);
        read_if(r, "learning_rate", cfg.ranker.learning_rate);
        read_if(r, "epochs", cfg.ranker.epochs);
        read_if(r, "rng_seed", cfg.ranker.rng_seed);
        if (cfg.ranker.k < 1) throw std::runtime_error("ranker.k must be >= 1");
    }
    if (j.contains("synthetic")) {
        const auto& s = j["synthetic"];
        read_if(s, "rng_seed", cfg.synthetic.rng_seed);
        read_if(s, "n_train", cfg.synthetic.n_train);
        read_if(s, "n_dev", cfg.synthetic.n_dev);
        read_if(s, "n_test", cfg.synthetic.n_test);
        read_if(s, "n_distractor_sentences", cfg.synthetic.n_distractor_sentences);
        read_if(s, "n_distractor_paragraphs", cfg.synthetic.n_distractor_paragraphs);
        read_if(s, "pronoun_rate", cfg.synthetic.pronoun_rate);
        read_if(s, "vocab", cfg.synthetic.vocab);
        read_if(s, "sum_split", cfg.synthetic.sum_split);
    }
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        read_if(p, "train", cfg.paths.train);
        read_if(p, "dev", cfg.paths.dev);
        read_if(p, "test", cfg.paths.test);
        read_if(p, "checkpoint", cfg.paths.checkpoint);
        read_if(p, "init_checkpoint", cfg.paths.init_checkpoint);
        read_if(p, "ranker_model", cfg.paths.ranker_model);
        read_if(p, "out_dir", cfg.paths.out_dir);
        read_if(p, "judgements", cfg.paths.judgements);
    }
    if (j.contains("oracle")) {
        const auto& o = j["oracle"];
        read_if(o, "kind", cfg.oracle.kind);
        read_if(o, "endpoint", cfg.oracle.endpoint);
        read_if(o, "timeout_s", cfg.oracle.timeout_s);
    }
    if (j.contains("acceptability")) {
        const auto& a = j["acceptability"];
        read_if(a, "kind", cfg.acceptability.kind);
        read_if(a, "endpoint", cfg.acceptability.endpoint);
        read_if(a, "timeout_s", cfg.acceptability.timeout_s);
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        read_if(e, "input_regime", cfg.eval.input_regime);
        read_if(e, "gold_passthrough", cfg.eval.gold_passthrough);
    }
    return cfg;
}

std::string RunConfig::to_json_text(int indent) const {
    json j;
    j["seed"] = seed;
    j["rl_steps"] = rl_steps;
    j["max_vocab"] = max_vocab;
    j["rl"] = {{"lambda_ml", rl.lambda_ml},
               {"sample_temperature", rl.sample_temperature},
               {"advantage_clip_min", rl.advantage_clip_min},
               {"noisiness_threshold", rl.noisiness_threshold},
               {"max_explanation_tokens", rl.max_explanation_tokens},
               {"rng_seed", rl.rng_seed}};
    j["train"] = {{"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"optimizer", train.optimizer},
                  {"max_epochs", train.max_epochs},
                  {"validate_every", train.validate_every},
                  {"patience", train.patience},
                  {"rng_seed", train.rng_seed}};
    j["model"] = {{"embed_dim", model.embed_dim},
                  {"hidden_dim", model.hidden_dim},
                  {"max_input_tokens", model.max_input_tokens}};
    j["ranker"] = {{"k", ranker.k},
                   {"learning_rate", ranker.learning_rate},
                   {"epochs", ranker.epochs},
                   {"rng_seed", ranker.rng_seed}};
    j["synthetic"] = {{"rng_seed", synthetic.rng_seed},
                      {"n_train", synthetic.n_train},
                      {"n_dev", synthetic.n_dev},
                      {"n_test", synthetic.n_test},
                      {"n_distractor_sentences", synthetic.n_distractor_sentences},
                      {"n_distractor_paragraphs", synthetic.n_distractor_paragraphs},
                      {"pronoun_rate", synthetic.pronoun_rate},
                      {"vocab", synthetic.vocab},
                      {"sum_split", synthetic.sum_split}};
    j["paths"] = {{"train", paths.train},
                  {"dev", paths.dev},
                  {"test", paths.test},
                  {"checkpoint", paths.checkpoint},
                  {"init_checkpoint", paths.init_checkpoint},
                  {"ranker_model", paths.ranker_model},
                  {"out_dir", paths.out_dir},
                  {"judgements", paths.judgements}};
    j["oracle"] = {{"kind", oracle.kind},
                   {"endpoint", oracle.endpoint},
                   {"timeout_s", oracle.timeout_s}};
    j["acceptability"] = {{"kind", acceptability.kind},
                          {"endpoint", acceptability.endpoint},
                          {"timeout_s", acceptability.timeout_s}};
    j["eval"] = {{"input_regime", eval.input_regime},
                 {"gold_passthrough", eval.gold_passthrough}};
    return j.dump(indent);
}

corpus::SyntheticSpec RunConfig::synthetic_spec(std::uint64_t seed_offset,
                                                int n_instances) const {
    corpus::SyntheticSpec spec;
    spec.rng_seed = synthetic.rng_seed + seed_offset;
    spec.n_instances = n_instances >= 0 ? n_instances : synthetic.n_train;
    spec.n_distractor_sentences = synthetic.n_distractor_sentences;
    spec.n_distractor_paragraphs = synthetic.n_distractor_paragraphs;
    spec.vocab = synthetic.vocab;
    spec.pronoun_rate = synthetic.pronoun_rate;
    return spec;
}

pipeline::EvalOptions RunConfig::eval_options() const {
    pipeline::EvalOptions opts;
    opts.regime = eval.input_regime == "ranked" ? pipeline::InputRegime::ranked
                                                : pipeline::InputRegime::gold_plus_distractor;
    opts.k = ranker.k;
    opts.distractors = 1;
    opts.seed = seed;
    opts.gold_passthrough = eval.gold_passthrough;
    opts.rl = rl;
    return opts;
}

std::string content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("content_hash: cannot open " + path);
    std::uint64_t h = 1469598103934665603ull;
    char buf[8192];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    char out[32];
    std::snprintf(out, sizeof(out), "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string provenance_json(const RunConfig& config,
                            const std::vector<std::string>& input_files) {
    json j;
    j["config"] = json::parse(config.to_json_text());
    json hashes = json::object();
    for (const auto& f : input_files) hashes[f] = content_hash(f);
    j["input_hashes"] = std::move(hashes);
    return j.dump();
}

}  // namespace exqa::config
