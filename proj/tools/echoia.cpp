#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "echoia/config.hpp"
#include "echoia/corpus_io.hpp"
#include "echoia/evaluation.hpp"
#include "echoia/service.hpp"
#include "echoia/simulation.hpp"

namespace fs = std::filesystem;
using namespace echoia;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;
};

ExperimentConfig resolve_config(const CommonOpts& opts) {
    ExperimentConfig cfg;
    if (!opts.config_path.empty()) {
        cfg = load_config(opts.config_path);
    }
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("override must be key=value: " + kv);
        }
        apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "experiment config file (key = value)");
    cmd->add_option("-s,--set", opts.overrides, "override a config key, e.g. --set seed=7")
        ->take_all();
}

int cmd_gen(const CommonOpts& opts) {
    const ExperimentConfig cfg = resolve_config(opts);
    const FeatureCatalog catalog = FeatureCatalog::standard();
    auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);

    write_corpus(cfg.corpus_dir, corpus);
    write_truth(cfg.corpus_dir, truth, catalog);
    {
        std::ofstream out(fs::path(cfg.corpus_dir) / "config.used");
        out << serialize_config(cfg);
    }

    std::int64_t windows = 0;
    double intruder = 0.0;
    for (const auto& dev : corpus.devices) {
        windows += window_count(dev.duration_ms, cfg.window_ms, cfg.hop_ms);
        intruder += dev.script.intruder_fraction();
    }
    intruder /= corpus.devices.empty() ? 1.0 : static_cast<double>(corpus.devices.size());
    std::cout << "corpus written to " << cfg.corpus_dir << "\n"
              << "  users:             " << corpus.devices.size() << "\n"
              << "  windows (total):   " << windows << "\n"
              << "  intruder fraction: " << intruder << "\n";
    if (cfg.separation == 0.0) {
        std::cout << "  note: null-separability corpus (separation = 0); expect chance-level "
                     "accuracy\n";
    }
    if (cfg.drift) {
        std::cout << "  drift: enabled (onset " << cfg.drift_onset_frac << " of timeline)\n";
    }
    return 0;
}

int cmd_run(const CommonOpts& opts) {
    const ExperimentConfig cfg = resolve_config(opts);
    if (!fs::exists(fs::path(cfg.corpus_dir) / "meta.json")) {
        std::cerr << "error: no corpus at " << cfg.corpus_dir << " (run `echoia gen` first)\n";
        return 2;
    }
    const Corpus corpus = load_corpus(cfg.corpus_dir);
    fs::create_directories(cfg.out_dir);

    bool any_aborted = false;
    std::vector<PerUserReport> summaries;
    for (Scheme scheme : cfg.schemes()) {
        auto reports = run_scheme(corpus, scheme, cfg.eval_config(scheme));
        write_timeline_csv(fs::path(cfg.out_dir) /
                               ("timeline_" + std::string(to_string(scheme)) + ".csv"),
                           reports);
        for (const auto& r : reports) {
            write_decision_log(fs::path(cfg.out_dir) / "decisions" / to_string(scheme) /
                                   (r.device_id + ".log"),
                               r.session_log);
            if (r.aborted) {
                any_aborted = true;
                std::cerr << "aborted: " << r.device_id << " (" << r.scheme
                          << "): " << r.abort_reason << "\n";
            }
        }
        const PerUserReport summary = per_user_report(reports);
        summaries.push_back(summary);
        std::cout << to_string(scheme) << ": mean final ACC = " << summary.mean_acc << "\n";
    }
    write_summary_json(fs::path(cfg.out_dir) / "summary.json", summaries);
    if (summaries.size() == 2) {
        std::cout << "echoia - baseline = " << summaries[0].mean_acc - summaries[1].mean_acc
                  << "\n";
    }
    std::cout << "reports written to " << cfg.out_dir << "\n";
    return any_aborted ? 1 : 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& decisions_dir) {
    const ExperimentConfig cfg = resolve_config(opts);
    const fs::path dir = decisions_dir.empty()
                             ? fs::path(cfg.out_dir) / "decisions"
                             : fs::path(decisions_dir);
    if (!fs::exists(dir)) {
        std::cerr << "error: no decision logs at " << dir << "\n";
        return 2;
    }
    const bool have_corpus = fs::exists(fs::path(cfg.corpus_dir) / "meta.json");
    std::optional<Corpus> corpus;
    if (have_corpus) {
        corpus = load_corpus(cfg.corpus_dir);
    } else {
        std::cout << "no corpus available; reporting lock rates only\n";
    }

    for (const auto& scheme_dir : fs::directory_iterator(dir)) {
        if (!scheme_dir.is_directory()) {
            continue;
        }
        std::cout << "scheme " << scheme_dir.path().filename().string() << ":\n";
        std::vector<fs::path> files;
        for (const auto& f : fs::directory_iterator(scheme_dir.path())) {
            files.push_back(f.path());
        }
        std::sort(files.begin(), files.end());
        double sum = 0.0;
        int counted = 0;
        for (const auto& file : files) {
            const auto decisions = load_decision_log(file);
            const std::string device = file.stem().string();
            if (!corpus) {
                std::int64_t locks = 0;
                for (const auto& d : decisions) {
                    locks += d.acted ? 1 : 0;
                }
                std::cout << "  " << device << ": " << decisions.size() << " decisions, "
                          << locks << " locks\n";
                continue;
            }
            const DeviceCorpus* dev = nullptr;
            for (const auto& d : corpus->devices) {
                if (d.device_id == device) {
                    dev = &d;
                }
            }
            if (dev == nullptr) {
                std::cout << "  " << device << ": not in corpus, skipped\n";
                continue;
            }
            ConfusionCounts counts;
            for (const auto& d : decisions) {
                const std::int64_t start = d.window_id * cfg.hop_ms;
                accumulate(counts, d.smoothed_legit,
                           window_truly_legit(dev->script, start, start + cfg.window_ms));
            }
            if (counts.total() > 0) {
                const double a = acc(counts);
                std::cout << "  " << device << ": ACC = " << a << "  (ta " << counts.ta
                          << ", tr " << counts.tr << ", fr " << counts.fr << ", fa "
                          << counts.fa << ")\n";
                sum += a;
                ++counted;
            }
        }
        if (counted > 0) {
            std::cout << "  mean ACC = " << sum / counted << "\n";
        }
    }
    return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const CommonOpts& opts) {
    const ExperimentConfig cfg = resolve_config(opts);
    const FeatureCatalog catalog = FeatureCatalog::standard();
    RecordStore store(cfg.data_dir);
    ControlServer server(catalog, cfg.runtime_config(cfg.schemes().front()), &store);
    TcpServer tcp(server, static_cast<std::uint16_t>(cfg.port));
    tcp.start();
    std::cout << "echoia control server listening on 127.0.0.1:" << tcp.port() << "\n"
              << "store: " << cfg.data_dir << "  (Ctrl-C to stop)\n";
    std::signal(SIGINT, [](int) { g_stop = true; });
    std::signal(SIGTERM, [](int) { g_stop = true; });
    while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
    }
    tcp.stop();
    std::cout << "stopped\n";
    return 0;
}

int cmd_interactive(const CommonOpts& opts, const std::string& device_id) {
    ExperimentConfig cfg = resolve_config(opts);
    const FeatureCatalog catalog = FeatureCatalog::standard();
    auto [corpus, truth] = gen_corpus(cfg.gen_config(), catalog);

    const DeviceCorpus* dev = &corpus.devices.front();
    if (!device_id.empty()) {
        for (const auto& d : corpus.devices) {
            if (d.device_id == device_id) {
                dev = &d;
            }
        }
    }
    std::cout << "interactive session on " << dev->device_id
              << " (answer prompts with: ok / wrong; consent with y / n; Ctrl-D quits)\n";

    const EvalConfig ec = cfg.eval_config(cfg.schemes().front());
    const std::int64_t total = window_count(dev->duration_ms, cfg.window_ms, cfg.hop_ms);
    const auto split = split_boundaries(total, ec.parts, ec.train_prefix);
    RuntimeConfig rc = ec.runtime;
    rc.hold_training_until_windows = split.train_end;
    DeviceRuntime runtime(dev->device_id, catalog, rc);
    DirectPort port(runtime);

    auto read_token = [](const std::string& prompt) -> std::optional<std::string> {
        std::cout << prompt << std::flush;
        std::string line;
        if (!std::getline(std::cin, line)) {
            std::cout << "\n";
            return std::nullopt;
        }
        return line;
    };

    DriverConfig dc;
    dc.prefix_end_ms = split.train_end * cfg.hop_ms;
    dc.seed = cfg.seed + 1;
    dc.password_hook = [&](std::int64_t ts) -> std::optional<bool> {
        const auto line = read_token("[t=" + std::to_string(ts / 1000) + "s] device locked - "
                                     "password (ok/wrong): ");
        if (!line) {
            return std::nullopt;
        }
        return *line == "ok" || *line == "y";
    };
    dc.pin_hook = [&](std::int64_t ts) -> std::optional<std::pair<bool, bool>> {
        const auto pin = read_token("[t=" + std::to_string(ts / 1000) + "s] PIN challenge - "
                                    "PIN (ok/wrong): ");
        if (!pin) {
            return std::nullopt;
        }
        const auto consent = read_token("consent to feature update (y/n): ");
        if (!consent) {
            return std::nullopt;
        }
        return std::make_pair(*pin == "ok" || *pin == "y",
                              *consent == "y" || *consent == "yes");
    };
    std::vector<std::string> last_top;
    dc.observer = [&](const StepEffects& fx, std::int64_t ts) {
        for (const auto& d : fx.decisions) {
            if (d.acted) {
                std::cout << "[t=" << ts / 1000 << "s] window " << d.window_id
                          << " scored " << d.score << " -> LOCKED\n";
            }
        }
        if (fx.model_trained) {
            std::cout << "[t=" << ts / 1000 << "s] model (re)trained\n";
        }
        if (fx.feature_set_update) {
            std::vector<std::string> top;
            for (FeatureId f : fx.feature_set_update->top) {
                top.push_back(catalog.name(f));
            }
            std::cout << "[t=" << ts / 1000 << "s] FEATURE_SET_UPDATE v"
                      << fx.feature_set_update->version << ": ";
            if (!last_top.empty()) {
                std::cout << "old = {";
                for (std::size_t i = 0; i < last_top.size(); ++i) {
                    std::cout << (i ? ", " : "") << last_top[i];
                }
                std::cout << "}  ";
            }
            std::cout << "new = {";
            for (std::size_t i = 0; i < top.size(); ++i) {
                std::cout << (i ? ", " : "") << top[i];
            }
            std::cout << "}\n";
            last_top = std::move(top);
        }
    };

    SessionLog log = run_device_session(*dev, port, dc);

    fs::create_directories(cfg.out_dir);
    const fs::path log_path = fs::path(cfg.out_dir) / "interactive_session.log";
    write_decision_log(log_path, log);
    std::cout << "session " << (log.stopped_early ? "ended by operator" : "complete") << "; "
              << log.decisions.size() << " decisions, " << log.events.size()
              << " feedback events\nlog flushed to " << log_path << "\n";
    if (log.aborted) {
        std::cerr << "aborted: " << log.abort_reason << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EchoIA: feedback-driven implicit authentication, desk-scale"};
    app.require_subcommand(1);

    CommonOpts gen_opts;
    CommonOpts run_opts;
    CommonOpts eval_opts;
    CommonOpts serve_opts;
    CommonOpts inter_opts;
    std::string decisions_dir;
    std::string device_id;

    auto* gen = app.add_subcommand("gen", "generate a synthetic behavioral corpus");
    add_common(gen, gen_opts);
    auto* run = app.add_subcommand("run", "run timeline evaluations over a corpus");
    add_common(run, run_opts);
    auto* eval = app.add_subcommand("eval", "recompute reports from decision logs");
    add_common(eval, eval_opts);
    eval->add_option("--decisions", decisions_dir, "decision log directory");
    auto* serve = app.add_subcommand("serve", "run the control server over TCP");
    add_common(serve, serve_opts);
    auto* inter = app.add_subcommand("interactive", "drive one device with live prompts");
    add_common(inter, inter_opts);
    inter->add_option("--device", device_id, "device to stream (default: first)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            return cmd_gen(gen_opts);
        }
        if (run->parsed()) {
            return cmd_run(run_opts);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_opts, decisions_dir);
        }
        if (serve->parsed()) {
            return cmd_serve(serve_opts);
        }
        if (inter->parsed()) {
            return cmd_interactive(inter_opts, device_id);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
