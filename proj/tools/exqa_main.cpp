#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "exqa/config.hpp"
#include "exqa/corpus.hpp"
#include "exqa/explainer.hpp"
#include "exqa/metrics.hpp"
#include "exqa/oracle.hpp"
#include "exqa/pipeline.hpp"
#include "exqa/ranker.hpp"
#include "exqa/remote.hpp"
#include "exqa/rewards.hpp"
#include "exqa/rng.hpp"
#include "exqa/textkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace exqa;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

struct CliError : std::runtime_error {
    int code;
    CliError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
};

json instance_to_json(const corpus::QAInstance& inst) {
    json rec;
    rec["_id"] = inst.id;
    rec["question"] = inst.question;
    rec["answer"] = inst.gold_answer;
    json context = json::array();
    for (const auto& p : inst.paragraphs) {
        context.push_back(json::array({p.title, p.sentences}));
    }
    rec["context"] = std::move(context);
    json sfs = json::array();
    for (const auto& sf : inst.supporting_facts) {
        sfs.push_back(json::array({sf.title, sf.sentence_index}));
    }
    rec["supporting_facts"] = std::move(sfs);
    if (inst.gold_explanation) rec["gold_explanation"] = *inst.gold_explanation;
    return rec;
}

void write_file(const std::string& path, const std::string& text) {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path);
    if (!out) throw CliError(kExitRuntimeError, "cannot write " + path);
    out << text;
}

void write_corpus(const std::string& path, const std::vector<corpus::QAInstance>& instances,
                  const json& provenance) {
    json j;
    j["provenance"] = provenance;
    json data = json::array();
    for (const auto& inst : instances) data.push_back(instance_to_json(inst));
    j["data"] = std::move(data);
    write_file(path, j.dump(1) + "\n");
}

config::RunConfig load_config(const std::string& path) {
    try {
        return path.empty() ? config::RunConfig{} : config::RunConfig::from_file(path);
    } catch (const std::exception& e) {
        throw CliError(kExitConfigError, e.what());
    }
}

json provenance(const config::RunConfig& cfg, const std::vector<std::string>& inputs) {
    json j;
    j["config"] = json::parse(cfg.to_json_text());
    json hashes = json::object();
    for (const auto& f : inputs) {
        if (!f.empty() && fs::exists(f)) hashes[f] = config::content_hash(f);
    }
    j["input_hashes"] = std::move(hashes);
    return j;
}

std::unique_ptr<AnswerOracle> make_oracle(const config::OracleConfig& cfg) {
    if (cfg.kind == "synthetic_rule") return std::make_unique<pipeline::SyntheticRuleOracle>();
    if (cfg.kind == "span_matcher") return std::make_unique<pipeline::SpanMatcherOracle>();
    if (cfg.kind == "remote") {
        if (cfg.endpoint.empty()) {
            throw CliError(kExitConfigError, "oracle.kind=remote requires oracle.endpoint");
        }
        return std::make_unique<remote::RemoteAnswerOracle>(cfg.endpoint, cfg.timeout_s);
    }
    throw CliError(kExitConfigError, "unknown oracle kind: " + cfg.kind);
}

std::unique_ptr<AcceptabilityScorer> make_acceptability(const config::AcceptabilityConfig& cfg) {
    if (cfg.kind == "builtin") return std::make_unique<BuiltinAcceptabilityScorer>();
    if (cfg.kind == "remote") {
        if (cfg.endpoint.empty()) {
            throw CliError(kExitConfigError, "acceptability.kind=remote requires endpoint");
        }
        return std::make_unique<remote::RemoteAcceptabilityScorer>(cfg.endpoint, cfg.timeout_s);
    }
    throw CliError(kExitConfigError, "unknown acceptability kind: " + cfg.kind);
}

std::vector<corpus::QAInstance> load_corpus_checked(const std::string& path,
                                                    const char* what) {
    if (path.empty()) {
        throw CliError(kExitConfigError, std::string("missing path for ") + what);
    }
    try {
        return corpus::load_hotpotqa(path);
    } catch (const std::exception& e) {
        throw CliError(kExitRuntimeError, e.what());
    }
}

json metrics_report_to_json(const metrics::MetricsReport& report) {
    json per = json::array();
    for (const auto& r : report.per_instance) {
        json row;
        row["id"] = r.id;
        row["f1"] = r.f1;
        row["em"] = r.em;
        if (r.cm) row["cm"] = *r.cm;
        if (r.abs) row["abs"] = *r.abs;
        if (r.rg2) row["rg2"] = *r.rg2;
        if (r.suf) row["suf"] = *r.suf;
        per.push_back(std::move(row));
    }
    json corpus_j;
    corpus_j["n_instances"] = report.corpus.n_instances;
    corpus_j["mean_f1"] = report.corpus.mean_f1;
    corpus_j["mean_em"] = report.corpus.mean_em;
    if (report.corpus.mean_cm) corpus_j["mean_cm"] = *report.corpus.mean_cm;
    if (report.corpus.mean_abs) {
        corpus_j["mean_abs"] = *report.corpus.mean_abs;
        corpus_j["mean_abs_pct"] = 100.0 * *report.corpus.mean_abs;
    }
    if (report.corpus.mean_rg2) corpus_j["mean_rg2"] = *report.corpus.mean_rg2;
    if (report.corpus.xf1) corpus_j["xf1"] = *report.corpus.xf1;
    if (report.corpus.suf_rate) corpus_j["suf_rate"] = *report.corpus.suf_rate;
    return json{{"per_instance", std::move(per)}, {"corpus", std::move(corpus_j)}};
}

json breakdown_to_json(const reward::RewardBreakdown& b) {
    json j;
    const auto names = reward::RewardBreakdown::element_names();
    const auto elems = b.elements();
    for (std::size_t i = 0; i < elems.size(); ++i) j[names[i]] = elems[i];
    j["combined"] = b.combined;
    j["degenerate_input"] = b.degenerate_input;
    return j;
}

// Sufficiency judgement file: array of {id, judgements: [{worker_id, label,
// worker_answer}]}. Gold answers come from the corpus.
std::map<std::string, int> load_sufficiency_labels(
    const std::string& path, const std::vector<corpus::QAInstance>& instances) {
    std::ifstream in(path);
    if (!in) throw CliError(kExitRuntimeError, "cannot open judgements file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw CliError(kExitRuntimeError, std::string("invalid judgements JSON: ") + e.what());
    }
    std::map<std::string, std::string> gold;
    for (const auto& inst : instances) gold[inst.id] = inst.gold_answer;

    std::map<std::string, int> labels;
    for (const auto& rec : j) {
        const std::string id = rec.at("id").get<std::string>();
        auto git = gold.find(id);
        if (git == gold.end()) continue;
        std::vector<metrics::SufficiencyJudgement> js;
        for (const auto& w : rec.at("judgements")) {
            metrics::SufficiencyJudgement sj;
            sj.worker_id = w.value("worker_id", "");
            sj.label = metrics::suf_label_from_string(w.at("label").get<std::string>());
            sj.worker_answer = w.value("worker_answer", "");
            sj.gold_answer = git->second;
            js.push_back(std::move(sj));
        }
        labels[id] = metrics::aggregate_sufficiency(js);
    }
    return labels;
}

explainer::Vocab build_vocab(const std::vector<explainer::TrainItem>& items,
                             const explainer::Vocab& encoding_vocab, std::size_t max_vocab,
                             const std::vector<corpus::QAInstance>& instances) {
    // Vocabulary over tokenized question/paragraph/explanation text.
    std::vector<std::string> texts;
    texts.reserve(instances.size() * 3);
    for (const auto& inst : instances) {
        texts.push_back(text::tokenize(inst.question, text::SourceKind::question).joined());
        texts.push_back(
            text::tokenize(inst.paragraphs_text(), text::SourceKind::paragraph).joined());
        if (inst.gold_explanation) {
            for (const auto& s : *inst.gold_explanation) {
                texts.push_back(text::tokenize(s, text::SourceKind::explanation).joined());
            }
        }
    }
    (void)items;
    (void)encoding_vocab;
    return explainer::Vocab::build(texts, max_vocab);
}

int cmd_gen_synthetic(const std::string& config_path) {
    config::RunConfig cfg = load_config(config_path);
    const json prov = provenance(cfg, config_path.empty() ? std::vector<std::string>{}
                                                          : std::vector<std::string>{config_path});
    const fs::path out_dir(cfg.paths.out_dir);

    auto gen = [&](std::uint64_t offset, int n) {
        auto spec = cfg.synthetic_spec(offset, n);
        return corpus::generate_synthetic(spec);
    };
    write_corpus((out_dir / "train.json").string(), gen(0, cfg.synthetic.n_train), prov);
    write_corpus((out_dir / "dev.json").string(), gen(1, cfg.synthetic.n_dev), prov);
    write_corpus((out_dir / "test.json").string(), gen(2, cfg.synthetic.n_test), prov);
    if (cfg.synthetic.sum_split) {
        auto spec = cfg.synthetic_spec(3, cfg.synthetic.n_train);
        spec.summarization_targets = true;
        write_corpus((out_dir / "sum_train.json").string(), corpus::generate_synthetic(spec), prov);
        auto dev_spec = cfg.synthetic_spec(4, cfg.synthetic.n_dev);
        dev_spec.summarization_targets = true;
        write_corpus((out_dir / "sum_dev.json").string(), corpus::generate_synthetic(dev_spec),
                     prov);
    }
    std::cout << "wrote synthetic splits to " << out_dir.string() << "\n";
    return 0;
}

int cmd_rank(const std::string& action, const std::string& config_path) {
    config::RunConfig cfg = load_config(config_path);
    if (action == "train") {
        auto instances = load_corpus_checked(cfg.paths.train, "rank train corpus");
        ranker::TrainStats stats;
        ranker::RankerModel model;
        try {
            model = ranker::train_ranker(instances, cfg.ranker, &stats);
        } catch (const std::exception& e) {
            throw CliError(kExitRuntimeError, e.what());
        }
        const std::string out = cfg.paths.ranker_model.empty()
                                    ? (fs::path(cfg.paths.out_dir) / "ranker.json").string()
                                    : cfg.paths.ranker_model;
        fs::path p(out);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        model.save(out);

        json log;
        log["provenance"] = provenance(cfg, {config_path, cfg.paths.train});
        log["epoch_bce"] = stats.epoch_bce;
        log["sampled_negatives"] = stats.sampled_negatives;
        write_file((fs::path(cfg.paths.out_dir) / "rank_train_log.json").string(),
                   log.dump(1) + "\n");
        std::cout << "ranker saved to " << out << "\n";
        return 0;
    }
    if (action == "eval") {
        auto instances = load_corpus_checked(cfg.paths.dev, "rank eval corpus");
        const std::string model_path =
            cfg.paths.ranker_model.empty()
                ? (fs::path(cfg.paths.out_dir) / "ranker.json").string()
                : cfg.paths.ranker_model;
        ranker::RankerModel model = ranker::RankerModel::load(model_path);
        const double recall = ranker::recall_at_k(model, instances, cfg.ranker.k);
        json out;
        out["provenance"] = provenance(cfg, {config_path, cfg.paths.dev, model_path});
        out["k"] = cfg.ranker.k;
        out["recall_at_k"] = recall;
        write_file((fs::path(cfg.paths.out_dir) / "rank_eval.json").string(),
                   out.dump(1) + "\n");
        std::cout << "recall@" << cfg.ranker.k << " = " << recall << "\n";
        return 0;
    }
    throw CliError(kExitConfigError, "rank action must be 'train' or 'eval'");
}

int cmd_train(const std::string& mode, const std::string& config_path) {
    config::RunConfig cfg = load_config(config_path);
    if (mode != "supervised" && mode != "rl" && mode != "joint") {
        throw CliError(kExitConfigError, "mode must be supervised, rl, or joint");
    }

    auto train_instances = load_corpus_checked(cfg.paths.train, "training corpus");
    auto dev_instances = load_corpus_checked(cfg.paths.dev, "dev corpus");

    if (mode == "supervised") {
        const bool any_gold = std::any_of(
            train_instances.begin(), train_instances.end(),
            [](const corpus::QAInstance& i) { return i.gold_explanation.has_value(); });
        if (!any_gold) {
            throw CliError(kExitConfigError,
                           "supervised mode needs gold explanations in the training corpus");
        }
    }

    explainer::ExplainerModel model = [&]() {
        if (!cfg.paths.init_checkpoint.empty()) {
            return explainer::load_checkpoint(cfg.paths.init_checkpoint);
        }
        if (mode != "supervised") {
            throw CliError(kExitConfigError,
                           "mode " + mode + " requires paths.init_checkpoint (a pretrained model)");
        }
        explainer::Vocab vocab =
            build_vocab({}, {}, cfg.max_vocab, train_instances);
        return explainer::ExplainerModel::init(std::move(vocab), cfg.model, cfg.seed);
    }();

    auto train_items = pipeline::build_train_items(train_instances, model.vocab, model.cfg,
                                                   1, cfg.seed);
    auto dev_items =
        pipeline::build_train_items(dev_instances, model.vocab, model.cfg, 1, cfg.seed + 1);

    const fs::path out_dir(cfg.paths.out_dir);
    const std::string checkpoint_path =
        cfg.paths.checkpoint.empty() ? (out_dir / (mode + "_checkpoint.json")).string()
                                     : cfg.paths.checkpoint;
    json log;
    log["provenance"] = provenance(cfg, {config_path, cfg.paths.train, cfg.paths.dev});
    log["mode"] = mode;

    if (mode == "supervised") {
        explainer::SupervisedResult result;
        try {
            result = explainer::train_supervised(std::move(model), train_items, dev_items,
                                                 cfg.train);
        } catch (const std::exception& e) {
            throw CliError(kExitRuntimeError, e.what());
        }
        log["steps"] = result.steps;
        log["best_val_nll"] = result.best_val_nll;
        log["validation_checks"] = result.validation_checks;
        log["early_stopped"] = result.early_stopped;
        model = std::move(result.model);
    } else {
        auto oracle = make_oracle(cfg.oracle);
        auto acceptability = make_acceptability(cfg.acceptability);
        reward::RLConfig rl = cfg.rl;
        if (mode == "rl") rl.lambda_ml = 0.0;

        explainer::JointTrainer trainer(std::move(model), cfg.train, rl, *oracle,
                                        *acceptability);
        Rng batch_rng(cfg.train.rng_seed);
        std::vector<std::size_t> order(train_items.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::size_t cursor = order.size();

        json steps_log = json::array();
        try {
            for (int step = 0; step < cfg.rl_steps; ++step) {
                std::vector<const explainer::TrainItem*> batch;
                for (int b = 0; b < cfg.train.batch_size; ++b) {
                    if (cursor >= order.size()) {
                        batch_rng.shuffle(order);
                        cursor = 0;
                    }
                    batch.push_back(&train_items[order[cursor++]]);
                }
                const auto diag = trainer.step(batch);
                if (step % 50 == 0 || step + 1 == cfg.rl_steps) {
                    json d;
                    d["step"] = step;
                    d["loss_rl"] = diag.loss_rl;
                    d["loss_ml"] = diag.loss_ml;
                    d["mean_reward_sampled"] = diag.mean_reward_sampled;
                    d["mean_reward_greedy"] = diag.mean_reward_greedy;
                    d["elemental_means"] = diag.elemental_means;
                    steps_log.push_back(std::move(d));
                }
            }
        } catch (const RewardUnavailableError& e) {
            throw CliError(kExitRuntimeError,
                           std::string("reward unavailable, aborting training: ") + e.what());
        }
        log["steps"] = cfg.rl_steps;
        log["diagnostics"] = std::move(steps_log);
        model = trainer.take_model();
    }

    fs::create_directories(out_dir);
    explainer::save_checkpoint(model, checkpoint_path, cfg.to_json_text(-1));
    write_file((out_dir / ("train_log_" + mode + ".json")).string(), log.dump(1) + "\n");

    // Dev metric report for this checkpoint.
    {
        auto oracle = make_oracle(cfg.oracle);
        auto acceptability = make_acceptability(cfg.acceptability);
        pipeline::EvalOptions opts = cfg.eval_options();
        std::unique_ptr<ranker::RankerModel> rmodel;
        if (opts.regime == pipeline::InputRegime::ranked) {
            rmodel = std::make_unique<ranker::RankerModel>(
                ranker::RankerModel::load(cfg.paths.ranker_model));
        }
        auto evaluation = pipeline::evaluate_corpus(dev_instances, rmodel.get(), model, *oracle,
                                                    *acceptability, opts);
        json report = metrics_report_to_json(evaluation.report);
        report["provenance"] = provenance(cfg, {config_path, cfg.paths.dev});
        write_file((out_dir / ("metrics_report_" + mode + ".json")).string(),
                   report.dump(1) + "\n");
    }
    std::cout << "checkpoint saved to " << checkpoint_path << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& split) {
    config::RunConfig cfg = load_config(config_path);
    const std::string corpus_path = split == "test" ? cfg.paths.test : cfg.paths.dev;
    auto instances = load_corpus_checked(corpus_path, "eval corpus");
    if (instances.empty()) throw CliError(kExitRuntimeError, "eval corpus is empty");

    explainer::ExplainerModel model = [&]() {
        if (cfg.paths.checkpoint.empty()) {
            throw CliError(kExitConfigError, "eval requires paths.checkpoint");
        }
        try {
            return explainer::load_checkpoint(cfg.paths.checkpoint);
        } catch (const std::exception& e) {
            throw CliError(kExitRuntimeError, e.what());
        }
    }();

    pipeline::EvalOptions opts = cfg.eval_options();
    std::unique_ptr<ranker::RankerModel> rmodel;
    if (opts.regime == pipeline::InputRegime::ranked) {
        if (cfg.paths.ranker_model.empty()) {
            throw CliError(kExitConfigError, "ranked regime requires paths.ranker_model");
        }
        rmodel = std::make_unique<ranker::RankerModel>(
            ranker::RankerModel::load(cfg.paths.ranker_model));
    }

    std::map<std::string, int> suf_labels;
    bool have_suf = false;
    if (!cfg.paths.judgements.empty()) {
        suf_labels = load_sufficiency_labels(cfg.paths.judgements, instances);
        have_suf = true;
    }

    auto oracle = make_oracle(cfg.oracle);
    auto acceptability = make_acceptability(cfg.acceptability);
    auto evaluation =
        pipeline::evaluate_corpus(instances, rmodel.get(), model, *oracle, *acceptability, opts,
                                  have_suf ? &suf_labels : nullptr);

    const fs::path out_dir(cfg.paths.out_dir);
    json report = metrics_report_to_json(evaluation.report);
    report["provenance"] = provenance(cfg, {config_path, corpus_path});
    if (!have_suf) report["notice"] = "xf1 omitted: no judgement file supplied";
    write_file((out_dir / "metrics_report.json").string(), report.dump(1) + "\n");

    json preds = json::array();
    for (const auto& r : evaluation.results) {
        json p;
        p["id"] = r.id;
        p["explanation"] = r.explanation;
        p["answer"] = r.answer;
        p["input_paragraphs"] = r.input_paragraphs;
        if (r.failed) {
            p["error"] = r.error;
        } else {
            p["rewards"] = breakdown_to_json(r.rewards);
            p["metrics"] = {{"f1", r.row.f1}, {"em", r.row.em}};
            if (r.row.cm) p["metrics"]["cm"] = *r.row.cm;
            if (r.row.abs) p["metrics"]["abs"] = *r.row.abs;
            if (r.row.rg2) p["metrics"]["rg2"] = *r.row.rg2;
        }
        preds.push_back(std::move(p));
    }
    json pred_file;
    pred_file["provenance"] = provenance(cfg, {config_path, corpus_path});
    pred_file["predictions"] = std::move(preds);
    write_file((out_dir / "predictions.json").string(), pred_file.dump(1) + "\n");

    std::cout << "mean_f1=" << evaluation.report.corpus.mean_f1;
    if (evaluation.report.corpus.mean_cm) std::cout << " mean_cm=" << *evaluation.report.corpus.mean_cm;
    if (evaluation.report.corpus.xf1) std::cout << " xf1=" << *evaluation.report.corpus.xf1;
    std::cout << "\n";
    return 0;
}

// Standalone scorer for (question, paragraphs, explanation) triples.
int cmd_score(const std::string& config_path, const std::string& in_path) {
    config::RunConfig cfg = load_config(config_path);
    std::ifstream in(in_path);
    if (!in) throw CliError(kExitRuntimeError, "cannot open " + in_path);
    json rows;
    try {
        in >> rows;
    } catch (const json::exception& e) {
        throw CliError(kExitRuntimeError, std::string("invalid JSON: ") + e.what());
    }
    if (!rows.is_array()) throw CliError(kExitRuntimeError, "score input must be a JSON array");

    auto oracle = make_oracle(cfg.oracle);
    auto acceptability = make_acceptability(cfg.acceptability);

    json out_rows = json::array();
    std::vector<metrics::InstanceMetrics> mrows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        const std::string id = r.value("id", "row#" + std::to_string(i));
        const std::string question = r.at("question").get<std::string>();
        std::string paragraphs;
        if (r.at("paragraphs").is_string()) {
            paragraphs = r["paragraphs"].get<std::string>();
        } else {
            for (const auto& s : r.at("paragraphs")) {
                if (!paragraphs.empty()) paragraphs += ' ';
                paragraphs += s.get<std::string>();
            }
        }
        const std::string explanation = r.at("explanation").get<std::string>();
        const std::string gold_answer = r.value("gold_answer", "");

        reward::RewardContext ctx{question, paragraphs, gold_answer};
        // No generator in the loop here, so the noisiness gate sees a
        // perfect sequence log-probability.
        const auto breakdown = reward::score_explanation(ctx, explanation, 0.0, cfg.rl, *oracle,
                                                         *acceptability);
        json row;
        row["id"] = id;
        row["rewards"] = breakdown_to_json(breakdown);

        metrics::InstanceMetrics m;
        m.id = id;
        const std::string predicted = oracle->answer(question, explanation);
        const auto f1em = metrics::answer_f1(predicted, gold_answer);
        m.f1 = f1em.f1;
        m.em = f1em.em;
        const auto e_toks = text::tokenize(explanation, text::SourceKind::explanation);
        const auto c_toks = text::tokenize(paragraphs, text::SourceKind::paragraph);
        if (!e_toks.empty()) {
            const auto conc = metrics::conciseness_metrics(e_toks, c_toks);
            m.cm = conc.cm;
            m.abs = conc.abs;
            row["cm"] = conc.cm;
            row["abs"] = conc.abs;
        }
        if (r.contains("gold_explanation")) {
            std::string gold_joined;
            for (const auto& s : r["gold_explanation"]) {
                if (!gold_joined.empty()) gold_joined += ' ';
                gold_joined += s.get<std::string>();
            }
            m.rg2 = metrics::rouge2(e_toks,
                                    text::tokenize(gold_joined, text::SourceKind::explanation));
            row["rg2"] = *m.rg2;
        }
        row["answer"] = predicted;
        mrows.push_back(std::move(m));
        out_rows.push_back(std::move(row));
    }
    const auto report = metrics::build_report(std::move(mrows));
    json out;
    out["provenance"] = provenance(cfg, {config_path, in_path});
    out["rows"] = std::move(out_rows);
    out["report"] = metrics_report_to_json(report);
    write_file((fs::path(cfg.paths.out_dir) / "score_report.json").string(), out.dump(1) + "\n");
    std::cout << "scored " << rows.size() << " rows\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"question-focused abstractive explanation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string mode = "supervised";
    std::string split = "dev";
    std::string rank_action;
    std::string score_in;
    int port = 8691;

    auto* gen = app.add_subcommand("gen-synthetic", "generate synthetic corpus splits");
    gen->add_option("--config", config_path, "config file");

    auto* rank = app.add_subcommand("rank", "train or evaluate the paragraph ranker");
    rank->add_option("action", rank_action, "train | eval")->required();
    rank->add_option("--config", config_path, "config file");

    auto* train = app.add_subcommand("train", "train the explainer");
    train->add_option("--mode", mode, "supervised | rl | joint");
    train->add_option("--config", config_path, "config file");

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--config", config_path, "config file");
    eval->add_option("--split", split, "dev | test");

    auto* score = app.add_subcommand("score", "score explanation triples without a model");
    score->add_option("--config", config_path, "config file");
    score->add_option("--in", score_in, "input JSON array")->required();

    auto* serve = app.add_subcommand("serve-stub", "run a local oracle/scorer stub server");
    serve->add_option("--port", port, "port to listen on");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_synthetic(config_path);
        if (rank->parsed()) return cmd_rank(rank_action, config_path);
        if (train->parsed()) return cmd_train(mode, config_path);
        if (eval->parsed()) return cmd_eval(config_path, split);
        if (score->parsed()) return cmd_score(config_path, score_in);
        if (serve->parsed()) {
            remote::StubServer server;
            std::cout << "stub server listening on 127.0.0.1:" << port << "\n";
            if (!server.listen_forever(port)) {
                std::cerr << "cannot listen on port " << port << "\n";
                return kExitRuntimeError;
            }
            return 0;
        }
    } catch (const CliError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeError;
    }
    return 0;
}
