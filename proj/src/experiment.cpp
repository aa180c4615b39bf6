#include "asgdro/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include "asgdro/errors.hpp"
#include "asgdro/robust_opt.hpp"

namespace asgdro::harness {

namespace {

using nlohmann::json;

json accuracy_json(const data::GroupAccuracy& a) {
    return {{"worst", a.worst}, {"average", a.average}, {"per_group", a.per_group}};
}

double median(std::vector<double> v) {
    if (v.empty()) return NAN;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::size_t class_count(const data::GroupedDataset& ds) {
    std::size_t top = 0;
    for (auto y : ds.labels) top = std::max(top, y);
    return std::max<std::size_t>(2, top + 1);
}

}  // namespace

const TestMetrics* RunRecord::test(const std::string& name) const {
    for (const auto& t : tests)
        if (t.name == name) return &t;
    return nullptr;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose, 0x5eedu};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

data::Splits load_or_generate(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.dataset == DatasetKind::File) return data::load_splits(cfg.dataset_path);
    data::ShiftSpec s = cfg.shift;
    s.seed = seed;
    return cfg.dataset == DatasetKind::CmnistProxy ? data::gen_cmnist_proxy(s) : data::gen_hcmnist_proxy(s);
}

data::GroupAccuracy evaluate(const ModelSpec& spec, const ParamVector& params, const data::GroupedDataset& ds) {
    return data::worst_group_accuracy(predict(spec, params, ds.inputs), ds.labels, ds.groups, ds.num_groups());
}

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    try {
        return run_seed(cfg, seed, load_or_generate(cfg, seed));
    } catch (const std::exception& e) {
        RunRecord r;
        r.seed = seed;
        r.algorithm = cfg.algorithm;
        r.failed = true;
        r.error = e.what();
        return r;
    }
}

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const data::Splits& splits) {
    RunRecord rec;
    rec.seed = seed;
    rec.algorithm = cfg.algorithm;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        cfg.validate();
        const auto& train = splits.train;
        train.require_all_groups();
        const std::size_t groups = train.num_groups();
        rec.model = cfg.model_for(train.dim(), class_count(train));

        DroConfig optim = cfg.optim;
        optim.group_counts = train.group_counts();
        ParamVector params = init_params(rec.model, derive_seed(seed, 1));
        GroupWeightState state = GroupWeightState::uniform(groups);
        const std::size_t steps = (train.size() + cfg.batch_size - 1) / cfg.batch_size;

        const bool grouped = uses_groups(cfg.algorithm);
        std::optional<data::ReweightedBatchStream> reweighted;
        std::optional<data::ShuffledBatchStream> shuffled;
        if (grouped)
            reweighted.emplace(train, cfg.batch_size, derive_seed(seed, 2));
        else
            shuffled.emplace(train, cfg.batch_size, derive_seed(seed, 2));

        double best_worst = -1.0;
        rec.checkpoint = params;
        for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
            double loss_sum = 0.0;
            double eps_sum = 0.0;
            for (std::size_t s = 0; s < steps; ++s) {
                if (grouped) {
                    const auto gb = reweighted->next();
                    const auto batches = data::split_by_group(gb, groups);
                    auto r = cfg.algorithm == Algorithm::ASGDRO ? asgdro_step(rec.model, params, batches, state, optim)
                                                                : gdro_step(rec.model, params, batches, state, optim);
                    params = std::move(r.params);
                    state = std::move(r.state);
                    loss_sum += r.diagnostics.erm_loss_at_theta;
                    eps_sum += r.diagnostics.epsilon_l2_norm;
                } else {
                    const auto gb = shuffled->next();
                    PlainStepResult r;
                    switch (cfg.algorithm) {
                        case Algorithm::SAM: r = sam_step(rec.model, params, gb.batch, optim); break;
                        case Algorithm::ASAM: r = asam_step(rec.model, params, gb.batch, optim); break;
                        default: r = erm_step(rec.model, params, gb.batch, optim); break;
                    }
                    params = std::move(r.params);
                    loss_sum += r.loss_at_theta;
                    eps_sum += r.epsilon_l2_norm;
                }
            }
            EpochMetrics em;
            em.epoch = epoch;
            em.train_loss = loss_sum / static_cast<double>(steps);
            em.mean_epsilon_norm = eps_sum / static_cast<double>(steps);
            if (grouped) em.lambdas = state.lambdas;
            if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs) {
                em.evaluated = true;
                em.val = evaluate(rec.model, params, splits.val);
                if (em.val.worst > best_worst) {
                    best_worst = em.val.worst;
                    rec.selected_epoch = epoch;
                    rec.selected_val = em.val;
                    rec.checkpoint = params;
                }
            }
            rec.epochs.push_back(std::move(em));
        }
        for (const auto& [name, ds] : splits.tests) rec.tests.push_back({name, evaluate(rec.model, rec.checkpoint, ds)});
    } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    rec.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<RunRecord> records(cfg.seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(cfg.seeds.size()); ++i)
        records[static_cast<std::size_t>(i)] = run_seed(cfg, cfg.seeds[static_cast<std::size_t>(i)]);
    return records;
}

std::vector<std::map<std::string, double>> expand_grid(const std::map<std::string, std::vector<double>>& grid) {
    std::vector<std::map<std::string, double>> cells{{}};
    for (const auto& [key, values] : grid) {
        if (values.empty()) throw ConfigError("empty sweep axis '" + key + "'");
        std::vector<std::map<std::string, double>> next;
        for (const auto& cell : cells)
            for (double v : values) {
                auto c = cell;
                c[key] = v;
                next.push_back(std::move(c));
            }
        cells = std::move(next);
    }
    return cells;
}

double mean_selected_val_worst(const std::vector<RunRecord>& records) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& r : records)
        if (!r.failed) {
            sum += r.selected_val.worst;
            ++n;
        }
    return n ? sum / static_cast<double>(n) : -1.0;
}

SweepResult sweep(const ExperimentConfig& cfg, const std::map<std::string, std::vector<double>>& grid) {
    SweepResult result;
    for (const auto& overrides : expand_grid(grid)) {
        ExperimentConfig c = cfg;
        for (const auto& [k, v] : overrides) apply_override(c, k, v);
        SweepCell cell;
        cell.overrides = overrides;
        cell.records = run_experiment(c);
        cell.score = mean_selected_val_worst(cell.records);
        result.cells.push_back(std::move(cell));
    }
    for (std::size_t k = 1; k < result.cells.size(); ++k)
        if (result.cells[k].score > result.cells[result.best].score) result.best = k;
    return result;
}

std::string metrics_csv(const std::vector<RunRecord>& records) {
    std::ostringstream out;
    out << "seed,epoch,split,group,metric,value\n";
    auto row = [&](std::uint64_t seed, std::size_t epoch, const std::string& split, const std::string& group,
                   const char* metric, double value) {
        out << seed << ',' << epoch << ',' << split << ',' << group << ',' << metric << ',' << format_double(value)
            << '\n';
    };
    auto acc_rows = [&](std::uint64_t seed, std::size_t epoch, const std::string& split, const data::GroupAccuracy& a) {
        for (std::size_t g = 0; g < a.per_group.size(); ++g) row(seed, epoch, split, std::to_string(g), "accuracy", a.per_group[g]);
        row(seed, epoch, split, "worst", "accuracy", a.worst);
        row(seed, epoch, split, "average", "accuracy", a.average);
    };
    for (const auto& r : records) {
        if (r.failed) continue;
        for (const auto& e : r.epochs) {
            row(r.seed, e.epoch, "train", "all", "loss", e.train_loss);
            if (e.mean_epsilon_norm > 0.0) row(r.seed, e.epoch, "train", "all", "epsilon_norm", e.mean_epsilon_norm);
            for (std::size_t g = 0; g < e.lambdas.size(); ++g) row(r.seed, e.epoch, "train", std::to_string(g), "lambda", e.lambdas[g]);
            if (e.evaluated) acc_rows(r.seed, e.epoch, "val", e.val);
        }
        for (const auto& t : r.tests) acc_rows(r.seed, r.selected_epoch, t.name, t.accuracy);
    }
    return out.str();
}

json summary_json(const ExperimentConfig& cfg, const std::vector<RunRecord>& records) {
    json runs = json::array();
    std::map<std::string, std::vector<double>> averages, worsts;
    std::vector<std::string> test_order;
    for (const auto& r : records) {
        json run{{"seed", r.seed}, {"failed", r.failed}, {"wall_clock_seconds", r.wall_clock_seconds}};
        if (r.failed) {
            run["error"] = r.error;
        } else {
            run["selected_epoch"] = r.selected_epoch;
            run["val"] = accuracy_json(r.selected_val);
            json tests = json::object();
            for (const auto& t : r.tests) {
                tests[t.name] = accuracy_json(t.accuracy);
                if (!averages.count(t.name)) test_order.push_back(t.name);
                averages[t.name].push_back(t.accuracy.average);
                worsts[t.name].push_back(t.accuracy.worst);
            }
            run["tests"] = tests;
            if (!r.epochs.empty() && !r.epochs.back().lambdas.empty()) run["final_lambdas"] = r.epochs.back().lambdas;
        }
        runs.push_back(run);
    }
    json agg = json::object();
    for (const auto& name : test_order) {
        const auto& a = averages[name];
        double mean = 0.0;
        for (double v : a) mean += v;
        mean /= static_cast<double>(a.size());
        double var = 0.0;
        for (double v : a) var += (v - mean) * (v - mean);
        const double sd = a.size() > 1 ? std::sqrt(var / static_cast<double>(a.size() - 1)) : 0.0;
        agg[name] = {{"median_average", median(a)}, {"mean_average", mean}, {"std_average", sd},
                     {"median_worst", median(worsts[name])}};
    }
    return {{"algorithm", to_string(cfg.algorithm)},
            {"config_fingerprint", fingerprint(cfg)},
            {"mean_selected_val_worst", mean_selected_val_worst(records)},
            {"runs", runs},
            {"aggregate", agg}};
}

json checkpoint_json(const ExperimentConfig& cfg, const RunRecord& record) {
    return {{"config", config_to_json(cfg)},
            {"config_fingerprint", fingerprint(cfg)},
            {"seed", record.seed},
            {"selected_epoch", record.selected_epoch},
            {"model", {{"layer_widths", record.model.layer_widths}, {"activation", to_string(record.model.activation)}}},
            {"params", record.checkpoint.values}};
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing checkpoint " + path.string());
    const json j = json::parse(in);
    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.selected_epoch = j.at("selected_epoch").get<std::size_t>();
    c.model.layer_widths = j.at("model").at("layer_widths").get<std::vector<std::size_t>>();
    c.model.activation = activation_from_string(j.at("model").at("activation").get<std::string>());
    c.params = ParamVector::from_values(c.model, j.at("params").get<std::vector<double>>());
    c.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    return c;
}

void write_run_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                       const std::vector<RunRecord>& records) {
    std::filesystem::create_directories(dir);
    write_text(dir / "config.json", config_to_json(cfg).dump(2) + "\n");
    write_text(dir / "metrics.csv", metrics_csv(records));
    write_text(dir / "summary.json", summary_json(cfg, records).dump(2) + "\n");
    for (const auto& r : records) {
        if (r.failed) continue;
        const auto sub = dir / ("seed_" + std::to_string(r.seed));
        std::filesystem::create_directories(sub);
        write_text(sub / "checkpoint.json", checkpoint_json(cfg, r).dump() + "\n");
    }
}

void write_sweep_outputs(const std::filesystem::path& dir, const ExperimentConfig& cfg, const SweepResult& result) {
    std::filesystem::create_directories(dir);
    std::ostringstream csv;
    std::vector<std::string> keys;
    if (!result.cells.empty())
        for (const auto& [k, v] : result.cells.front().overrides) keys.push_back(k);
    std::vector<std::string> tests;
    for (const auto& cell : result.cells)
        for (const auto& r : cell.records)
            if (!r.failed && tests.empty())
                for (const auto& t : r.tests) tests.push_back(t.name);
    csv << "cell,seed";
    for (const auto& k : keys) csv << ',' << k;
    csv << ",failed,selected_epoch,val_worst";
    for (const auto& t : tests) csv << ',' << t << "_average," << t << "_worst";
    csv << '\n';
    json cells = json::array();
    for (std::size_t c = 0; c < result.cells.size(); ++c) {
        const auto& cell = result.cells[c];
        ExperimentConfig cc = cfg;
        for (const auto& [k, v] : cell.overrides) apply_override(cc, k, v);
        for (const auto& r : cell.records) {
            csv << c << ',' << r.seed;
            for (const auto& k : keys) csv << ',' << format_double(cell.overrides.at(k));
            csv << ',' << (r.failed ? 1 : 0) << ',' << r.selected_epoch << ',' << format_double(r.selected_val.worst);
            for (const auto& t : tests) {
                const auto* m = r.test(t);
                csv << ',' << (m ? format_double(m->accuracy.average) : "") << ','
                    << (m ? format_double(m->accuracy.worst) : "");
            }
            csv << '\n';
        }
        write_run_outputs(dir / ("cell_" + std::to_string(c)), cc, cell.records);
        cells.push_back({{"cell", c}, {"overrides", cell.overrides}, {"score", cell.score}});
    }
    write_text(dir / "sweep.csv", csv.str());
    json summary{{"cells", cells}, {"best_cell", result.best}, {"selection", "mean selected worst-group val accuracy"}};
    if (!result.cells.empty()) summary["best_overrides"] = result.cells[result.best].overrides;
    write_text(dir / "sweep.json", summary.dump(2) + "\n");
}

json spectrum_json(const spectra::SpectrumReport& report, const std::string& config_fingerprint) {
    auto entry = [](const spectra::SpectrumEntry& e) {
        return json{{"largest_eig", e.largest},
                    {"second_eig", e.second},
                    {"iterations", {e.iterations_largest, e.iterations_second}},
                    {"residuals", {e.residual_largest, e.residual_second}},
                    {"converged", e.converged}};
    };
    json groups = json::array();
    for (std::size_t g = 0; g < report.per_group.size(); ++g) {
        json e = entry(report.per_group[g]);
        e["group"] = g;
        e["name"] = g < report.group_names.size() ? report.group_names[g] : "";
        groups.push_back(e);
    }
    return {{"config_fingerprint", config_fingerprint},
            {"per_group", groups},
            {"pooled", entry(report.pooled)},
            {"worst_group_largest_eig", report.worst_group_largest()}};
}

json emit_spectrum(const std::filesystem::path& checkpoint_path, const data::GroupedDataset* dataset,
                   const std::filesystem::path& out_file) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    std::optional<data::Splits> generated;
    if (!dataset) {
        generated = load_or_generate(ck.config, ck.seed);
        dataset = &generated->train;
    }
    const auto report = spectra::per_group_spectrum(ck.model, ck.params, *dataset, ck.config.spectrum);
    json j = spectrum_json(report, ck.config_fingerprint);
    j["seed"] = ck.seed;
    j["algorithm"] = to_string(ck.config.algorithm);
    if (!out_file.empty()) {
        if (out_file.has_parent_path()) std::filesystem::create_directories(out_file.parent_path());
        write_text(out_file, j.dump(2) + "\n");
    }
    return j;
}

}  // namespace asgdro::harness
