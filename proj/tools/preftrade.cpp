// Command-line front end: ingest, backtest, build-prefs, train-loop,
// eval-agreement, report. One global --seed fans out to per-component RNG
// streams, so partial re-runs with the same inputs are byte-identical.
#include <CLI11.hpp>

#include <preftrade/config.hpp>
#include <preftrade/evaluation.hpp>
#include <preftrade/preftrade.hpp>

#include <filesystem>
#include <future>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

namespace pt = preftrade;

namespace {

constexpr const char* kCliModule = "cli";

struct DataFlags {
    std::string candles, onchain, news, sentiment;

    void attach(CLI::App* cmd) {
        cmd->add_option("--candles", candles, "OHLCV candles CSV")->required();
        cmd->add_option("--onchain", onchain, "daily on-chain metrics CSV")->required();
        cmd->add_option("--news", news, "news articles JSONL")->required();
        cmd->add_option("--sentiment", sentiment, "daily sentiment vectors CSV")->required();
    }

    pt::MarketCorpus load(int max_hamming) const {
        return pt::MarketCorpus::load(candles, onchain, news, sentiment, max_hamming);
    }
};

struct ConfigFlags {
    std::string config_file;
    std::vector<std::string> sets;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "flat key = value config file");
        cmd->add_option("--set", sets, "config override, key=value (repeatable)");
    }

    pt::RunConfig resolve() const {
        pt::RunConfig c;
        if (!config_file.empty()) pt::load_config_file(c, config_file);
        for (const auto& kv : sets) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                pt::fail(kCliModule, "--set expects key=value, got '" + kv + "'");
            pt::config_set(c, pt::strip(std::string_view(kv).substr(0, eq)),
                           pt::strip(std::string_view(kv).substr(eq + 1)));
        }
        return c;
    }
};

void write_text(const std::string& path, const std::string& content) {
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    pt::atomic_write_file(path, content, kCliModule);
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
    } else {
        write_text(out_path, content);
    }
}

// ---------------------------------------------------------------------------
// ingest: validate and deduplicate the corpus, write a digest of what loaded.

int cmd_ingest(const DataFlags& data, const ConfigFlags& conf, const std::string& out) {
    pt::RunConfig cfg = conf.resolve();
    pt::MarketCorpus corpus = data.load(cfg.max_hamming);
    nlohmann::json j;
    j["complete_days"] = nlohmann::json::array();
    for (pt::Day d : corpus.complete_days()) j["complete_days"].push_back(pt::format_day(d));
    j["sentiment_dim"] = corpus.sentiment_dim();
    j["news"] = {{"raw", corpus.news_raw_count()}, {"deduplicated", corpus.news().size()}};
    j["articles"] = nlohmann::json::array();
    for (const auto& a : corpus.news()) {
        j["articles"].push_back({{"id", a.id},
                                 {"timestamp", pt::format_instant(a.timestamp)},
                                 {"publisher", a.publisher}});
    }
    emit(out, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// backtest: run one or more regime windows, optionally in parallel.

std::unique_ptr<pt::Policy> make_policy(const std::string& name, const pt::RunConfig& cfg) {
    if (name == "zero") return std::make_unique<pt::ZeroPolicy>();
    if (name == "momentum") return std::make_unique<pt::MomentumPolicy>();
    if (name.rfind("actor:", 0) == 0) {
        pt::ModelBundle models = pt::load_models(name.substr(6));
        return std::make_unique<pt::ActorDrivenPolicy>(std::move(models), cfg.prefs.k_candidates,
                                                       cfg.rewards.ew_halflife_days, cfg.seed);
    }
    return std::make_unique<pt::CsvPolicy>(name);  // scripted date,alpha file
}

int cmd_backtest(const DataFlags& data, const ConfigFlags& conf, const std::string& regimes_path,
                 const std::vector<std::string>& window_specs, const std::string& policy_name,
                 bool seed_given, std::uint64_t seed, int jobs, const std::string& out) {
    pt::RunConfig cfg = conf.resolve();
    if (seed_given) cfg.seed = seed;
    if (jobs < 1) pt::fail(kCliModule, "--jobs must be at least 1");
    pt::MarketCorpus corpus = data.load(cfg.max_hamming);
    std::vector<pt::RegimeWindow> all = pt::load_regimes(regimes_path);

    std::vector<pt::RegimeWindow> selected;
    for (const auto& spec : window_specs) {
        if (spec == "all") {
            selected = all;
            break;
        }
        auto colon = spec.find(':');
        if (colon == std::string::npos)
            pt::fail(kCliModule, "--asset-window expects ASSET:label or 'all', got '" + spec + "'");
        auto asset = pt::parse_asset(spec.substr(0, colon));
        auto label = pt::parse_regime_label(spec.substr(colon + 1));
        if (!asset || !label)
            pt::fail(kCliModule, "--asset-window: unknown asset or label in '" + spec + "'");
        bool found = false;
        for (const auto& w : all) {
            if (w.asset == *asset && w.label == *label) {
                selected.push_back(w);
                found = true;
            }
        }
        if (!found) pt::fail(kCliModule, "no regime window matches '" + spec + "'");
    }
    if (selected.empty()) pt::fail(kCliModule, "no regime windows selected");

    auto run_one = [&](const pt::RegimeWindow& w) {
        pt::BacktestConfig bc = cfg.backtest;
        bc.rng_seed = pt::stream_seed(
            cfg.seed, "backtest/" + std::string(pt::to_string(w.asset)) + "/" +
                          std::string(pt::to_string(w.label)));
        auto policy = make_policy(policy_name, cfg);  // fresh state per window
        pt::BacktestResult result = pt::run_backtest(w, *policy, corpus, bc);
        return pt::backtest_report_json(w, bc, result);
    };

    std::vector<nlohmann::json> reports(selected.size());
    if (jobs <= 1) {
        for (std::size_t i = 0; i < selected.size(); ++i) reports[i] = run_one(selected[i]);
    } else {
        for (std::size_t base = 0; base < selected.size(); base += std::size_t(jobs)) {
            std::size_t chunk = std::min(std::size_t(jobs), selected.size() - base);
            std::vector<std::future<nlohmann::json>> futs;
            for (std::size_t k = 0; k < chunk; ++k) {
                futs.push_back(std::async(std::launch::async, run_one, selected[base + k]));
            }
            for (std::size_t k = 0; k < chunk; ++k) reports[base + k] = futs[k].get();
        }
    }

    nlohmann::json top;
    top["runs"] = reports;
    write_text(out, top.dump(2) + "\n");

    std::string csv = "date,asset,label,wealth\n";
    for (const auto& r : reports) {
        for (const auto& row : r.at("wealth")) {
            csv += row.at("date").get<std::string>() + "," + r.at("asset").get<std::string>() +
                   "," + r.at("label").get<std::string>() + "," +
                   pt::fmt_double(row.at("wealth").get<double>()) + "\n";
        }
    }
    std::filesystem::path p(out);
    write_text((p.parent_path() / (p.stem().string() + ".wealth.csv")).string(), csv);
    return 0;
}

// ---------------------------------------------------------------------------
// build-prefs: one dataset-construction sweep, written as JSONL artifacts.

int cmd_build_prefs(const DataFlags& data, const ConfigFlags& conf,
                    const std::string& candidates_path, bool seed_given, std::uint64_t seed,
                    const std::string& out_dir) {
    pt::RunConfig cfg = conf.resolve();
    if (seed_given) cfg.seed = seed;
    pt::MarketCorpus corpus = data.load(cfg.max_hamming);
    pt::LoopConfig loop = cfg.loop_config();
    pt::DayMarketSeries series = pt::build_day_series(corpus, loop.rewards.ew_halflife_days);
    pt::ModelBundle models = pt::init_models(int(corpus.sentiment_dim()), loop);

    std::unique_ptr<pt::CandidateSource> source;
    if (!candidates_path.empty()) {
        source = std::make_unique<pt::JsonlCandidateSource>(candidates_path);
    } else {
        source = std::make_unique<pt::SyntheticCandidateSource>(
            cfg.prefs.k_candidates, int(corpus.sentiment_dim()),
            pt::stream_seed(cfg.seed, "prefs.candidates"));
    }
    pt::RngStream noise(cfg.seed, "prefs.noise");
    pt::DatasetPass pass = pt::construct_dataset(corpus, *source, models, series, cfg.prefs,
                                                 cfg.rewards, loop.probe_notional_base, noise);
    std::filesystem::create_directories(out_dir);
    write_text(out_dir + "/candidates.jsonl", pt::serialize_candidates_jsonl(pass.candidates));
    write_text(out_dir + "/pairs.jsonl", pt::serialize_pairs_jsonl(pass.pair_records));
    return 0;
}

// ---------------------------------------------------------------------------
// train-loop: alternate dataset construction and optimization, save models.

int cmd_train_loop(const ConfigFlags& conf, const std::string& data_dir, bool epochs_given,
                   int epochs, bool seed_given, std::uint64_t seed, const std::string& out_dir) {
    pt::RunConfig cfg = conf.resolve();
    if (seed_given) cfg.seed = seed;
    if (epochs_given) cfg.epochs = epochs;
    pt::MarketCorpus corpus =
        pt::MarketCorpus::load(data_dir + "/candles.csv", data_dir + "/onchain.csv",
                               data_dir + "/news.jsonl", data_dir + "/sentiment.csv",
                               cfg.max_hamming);
    pt::LoopConfig loop = cfg.loop_config();
    pt::SyntheticCandidateSource source(cfg.prefs.k_candidates, int(corpus.sentiment_dim()),
                                        pt::stream_seed(cfg.seed, "loop.candidates"));
    pt::LoopResult result = pt::run_training_loop(corpus, source, loop);
    std::filesystem::create_directories(out_dir);
    pt::save_models(result.models, out_dir);
    write_text(out_dir + "/metrics.csv", result.metrics_csv);
    return 0;
}

// ---------------------------------------------------------------------------
// eval-agreement: inter-rater statistics per rating dimension.

int cmd_eval_agreement(const std::string& in_path, const std::string& metric_name,
                       const std::string& out) {
    auto metric = pt::parse_alpha_metric(metric_name);
    if (!metric)
        pt::fail(kCliModule, "--metric must be nominal, ordinal or interval, got '" +
                                 metric_name + "'");
    auto dims = pt::load_ratings_csv(in_path);
    nlohmann::json j;
    j["metric"] = metric_name;
    j["dimensions"] = nlohmann::json::array();
    for (const auto& d : dims) {
        nlohmann::json entry;
        entry["dimension"] = d.dimension;
        entry["raters"] = d.raters.size();
        entry["items"] = d.items.size();
        try {
            entry["kendalls_w"] = pt::kendalls_w(d.matrix);
        } catch (const pt::Error& e) {
            entry["kendalls_w"] = nullptr;
            entry["kendalls_w_note"] = e.what();
        }
        try {
            auto alpha = pt::krippendorff_alpha(d.matrix, *metric);
            if (alpha) {
                entry["alpha"] = *alpha;
            } else {
                entry["alpha"] = nullptr;
                entry["alpha_note"] = "no expected disagreement";
            }
        } catch (const pt::Error& e) {
            entry["alpha"] = nullptr;
            entry["alpha_note"] = e.what();
        }
        entry["likert"] = pt::aggregate_likert(d.all_scores).formatted;
        entry["n_scores"] = d.all_scores.size();
        j["dimensions"].push_back(entry);
    }
    emit(out, j.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// report: convert a backtest report to a flat wealth CSV.

int cmd_report(const std::string& in_path, const std::string& format, const std::string& out) {
    if (format != "csv") pt::fail(kCliModule, "--format supports only 'csv', got '" + format + "'");
    nlohmann::json j = nlohmann::json::parse(pt::read_file(in_path, kCliModule), nullptr, false);
    if (j.is_discarded()) pt::fail(kCliModule, in_path + ": invalid JSON");
    std::vector<nlohmann::json> runs;
    if (j.contains("runs")) {
        for (const auto& r : j.at("runs")) runs.push_back(r);
    } else {
        runs.push_back(j);  // a single bare run object
    }
    std::string csv = "date,asset,label,wealth\n";
    try {
        for (const auto& r : runs) {
            for (const auto& row : r.at("wealth")) {
                csv += row.at("date").get<std::string>() + "," +
                       r.at("asset").get<std::string>() + "," +
                       r.at("label").get<std::string>() + "," +
                       pt::fmt_double(row.at("wealth").get<double>()) + "\n";
            }
        }
    } catch (const nlohmann::json::exception& e) {
        pt::fail(kCliModule, in_path + ": not a backtest report: " + e.what());
    }
    emit(out, csv);
    return 0;
}

int run(int argc, char** argv) {
    CLI::App app{"preference-trained crypto trading pipeline"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate market data and write a corpus digest");
    DataFlags ingest_data;
    ingest_data.attach(ingest);
    ConfigFlags ingest_conf;
    ingest_conf.attach(ingest);
    std::string ingest_out;
    ingest->add_option("--out", ingest_out, "digest JSON path (stdout when omitted)");

    // backtest
    auto* backtest = app.add_subcommand("backtest", "run regime-window backtests");
    DataFlags bt_data;
    bt_data.attach(backtest);
    ConfigFlags bt_conf;
    bt_conf.attach(backtest);
    std::string bt_regimes, bt_policy = "zero", bt_out;
    std::vector<std::string> bt_windows{"all"};
    std::uint64_t bt_seed = 42;
    int bt_jobs = 1;
    backtest->add_option("--regimes", bt_regimes, "regime windows CSV")->required();
    backtest->add_option("--asset-window", bt_windows,
                         "ASSET:label selector or 'all' (repeatable)")
        ->capture_default_str();
    backtest->add_option("--policy", bt_policy,
                         "zero | momentum | actor:<models-dir> | <alphas.csv>")
        ->capture_default_str();
    auto* bt_seed_opt = backtest->add_option("--seed", bt_seed, "global seed override");
    backtest->add_option("--jobs", bt_jobs, "windows to run concurrently")->capture_default_str();
    backtest->add_option("--out", bt_out, "report JSON path; a .wealth.csv sibling is written")
        ->required();

    // build-prefs
    auto* prefs = app.add_subcommand("build-prefs", "construct one preference dataset pass");
    DataFlags pf_data;
    pf_data.attach(prefs);
    ConfigFlags pf_conf;
    pf_conf.attach(prefs);
    std::string pf_candidates, pf_out;
    std::uint64_t pf_seed = 42;
    prefs->add_option("--candidates", pf_candidates,
                      "replay candidates from this JSONL instead of sampling");
    auto* pf_seed_opt = prefs->add_option("--seed", pf_seed, "global seed override");
    prefs->add_option("--out", pf_out, "output directory for candidates.jsonl and pairs.jsonl")
        ->required();

    // train-loop
    auto* train = app.add_subcommand("train-loop", "run the preference-optimization loop");
    ConfigFlags tr_conf;
    tr_conf.attach(train);
    std::string tr_data, tr_out;
    int tr_epochs = 1;
    std::uint64_t tr_seed = 42;
    train->add_option("--data", tr_data,
                      "directory holding candles.csv, onchain.csv, news.jsonl, sentiment.csv")
        ->required();
    auto* tr_epochs_opt = train->add_option("--epochs", tr_epochs, "epoch count override");
    auto* tr_seed_opt = train->add_option("--seed", tr_seed, "global seed override");
    train->add_option("--out", tr_out, "output directory for model JSONs and metrics.csv")
        ->required();

    // eval-agreement
    auto* agree = app.add_subcommand("eval-agreement", "inter-rater agreement statistics");
    std::string ag_in, ag_metric, ag_out;
    agree->add_option("--in", ag_in, "ratings CSV (rater,item,dimension,score)")->required();
    agree->add_option("--metric", ag_metric, "nominal | ordinal | interval")->required();
    agree->add_option("--out", ag_out, "agreement JSON path (stdout when omitted)");

    // report
    auto* report = app.add_subcommand("report", "convert a backtest report");
    std::string rp_in, rp_format = "csv", rp_out;
    report->add_option("--in", rp_in, "report JSON from the backtest subcommand")->required();
    report->add_option("--format", rp_format, "output format")->capture_default_str();
    report->add_option("--out", rp_out, "output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "error: cli: " << e.what() << "\n";
        return 2;
    }

    if (*ingest) return cmd_ingest(ingest_data, ingest_conf, ingest_out);
    if (*backtest)
        return cmd_backtest(bt_data, bt_conf, bt_regimes, bt_windows, bt_policy,
                            bt_seed_opt->count() > 0, bt_seed, bt_jobs, bt_out);
    if (*prefs)
        return cmd_build_prefs(pf_data, pf_conf, pf_candidates, pf_seed_opt->count() > 0, pf_seed,
                               pf_out);
    if (*train)
        return cmd_train_loop(tr_conf, tr_data, tr_epochs_opt->count() > 0, tr_epochs,
                              tr_seed_opt->count() > 0, tr_seed, tr_out);
    if (*agree) return cmd_eval_agreement(ag_in, ag_metric, ag_out);
    if (*report) return cmd_report(rp_in, rp_format, rp_out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const pt::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: cli: " << e.what() << "\n";
        return 2;
    }
}
