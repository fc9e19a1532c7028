// Command-line front end for the engine: single-point cumulant evaluation,
// 2-D parameter sweeps (exact solver or trained surrogate), dataset
// generation, network training/evaluation and the invariant suite.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dqhe/dqhe.hpp"

namespace {

std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct CliConfig {
    dqhe::FcsConfig fcs;
    dqhe::TrainConfig train;
};

// key=value lines; '#' starts a comment
CliConfig load_config(const std::string& path) {
    CliConfig cfg;
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) dqhe::raise(dqhe::errc::io_error, "cannot open config file " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            dqhe::raise(dqhe::errc::bad_config,
                        path + ":" + std::to_string(line_no) + ": expected key=value");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        try {
            if (key == "grid_points") cfg.fcs.grid_points = std::stoi(value);
            else if (key == "lambda_step") cfg.fcs.lambda_step = std::stod(value);
            else if (key == "richardson") cfg.fcs.richardson = std::stoi(value) != 0;
            else if (key == "integral_tol") cfg.fcs.integral_tol = std::stod(value);
            else if (key == "max_grid_points") cfg.fcs.max_grid_points = std::stoi(value);
            else if (key == "fourth_order_rdot") cfg.fcs.fourth_order_rdot = std::stoi(value) != 0;
            else if (key == "sigma0") cfg.train.sigma0 = std::stod(value);
            else if (key == "sigma_dec") cfg.train.sigma_dec = std::stod(value);
            else if (key == "sigma_inc") cfg.train.sigma_inc = std::stod(value);
            else if (key == "sigma_max") cfg.train.sigma_max = std::stod(value);
            else if (key == "patience") cfg.train.patience = std::stoi(value);
            else if (key == "max_epochs") cfg.train.max_epochs = std::stoi(value);
            else dqhe::raise(dqhe::errc::bad_config, path + ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            dqhe::raise(dqhe::errc::bad_config, path + ": bad value for '" + key + "'");
        }
    }
    return cfg;
}

void add_param_flags(CLI::App* cmd, dqhe::EngineParams& p) {
    cmd->add_option("--Tc0", p.T_c0, "cold-bath base temperature");
    cmd->add_option("--Th0", p.T_h0, "hot-bath base temperature");
    cmd->add_option("--Tl", p.T_l, "cavity temperature");
    cmd->add_option("--phi", p.phi, "driving phase difference");
    cmd->add_option("--ph", p.p_h, "hot-bath coherence control");
    cmd->add_option("--pc", p.p_c, "cold-bath coherence control");
    cmd->add_option("--A0", p.A0, "driving amplitude");
    cmd->add_option("--omega", p.omega, "driving angular frequency");
    cmd->add_option("--r", p.r, "system-bath coupling");
    cmd->add_option("--g", p.g, "system-cavity coupling");
}

int run_point(const dqhe::EngineParams& params, const dqhe::FcsConfig& fcs) {
    const dqhe::CumulantSet c = dqhe::cumulants(params, fcs);
    std::cout << "c_d1=" << fmt17(c.c_d1) << "\n";
    std::cout << "c_d2=" << fmt17(c.c_d2) << "\n";
    std::cout << "c_g1=" << fmt17(c.c_g1) << "\n";
    std::cout << "c_g2=" << fmt17(c.c_g2) << "\n";
    std::cout << "fano=" << fmt17(c.fano) << "\n";
    std::cout << "affinity=" << fmt17(c.affinity) << "\n";
    std::cout << "tur_product=" << fmt17(c.tur_product) << "\n";
    std::cout << "entropy_rate=" << fmt17(dqhe::entropy_production_rate(c)) << "\n";
    std::cout << "fcs_grid_points=" << fcs.grid_points << "\n";
    std::cout << "fcs_lambda_step=" << fmt17(fcs.lambda_step) << "\n";
    std::cout << "fcs_richardson=" << (fcs.richardson ? 1 : 0) << "\n";
    std::cout << "fcs_integral_tol=" << fmt17(fcs.integral_tol) << "\n";
    return 0;
}

struct SweepAxis {
    std::string name;
    double min = 0.0;
    double max = 1.0;
    int steps = 2;
};

double* axis_target(dqhe::EngineParams& p, const std::string& name) {
    static const std::map<std::string, double dqhe::EngineParams::*> fields{
        {"Tc0", &dqhe::EngineParams::T_c0}, {"Th0", &dqhe::EngineParams::T_h0},
        {"Tl", &dqhe::EngineParams::T_l},   {"phi", &dqhe::EngineParams::phi},
        {"ph", &dqhe::EngineParams::p_h},   {"pc", &dqhe::EngineParams::p_c}};
    const auto it = fields.find(name);
    if (it == fields.end())
        dqhe::raise(dqhe::errc::bad_config,
                    "unknown sweep parameter '" + name + "' (use Tc0, Th0, Tl, phi, ph, pc)");
    return &(p.*(it->second));
}

double select_quantity(const dqhe::CumulantSet& c, const std::string& quantity) {
    if (quantity == "F") return c.fano;
    if (quantity == "cd1") return c.c_d1;
    if (quantity == "cd2") return c.c_d2;
    if (quantity == "cg1") return c.c_g1;
    if (quantity == "cg2") return c.c_g2;
    if (quantity == "affinity") return c.affinity;
    if (quantity == "FA") return c.tur_product;
    dqhe::raise(dqhe::errc::bad_config, "unknown quantity '" + quantity + "'");
}

int run_sweep(const dqhe::EngineParams& base, const dqhe::FcsConfig& fcs, const SweepAxis& x,
              const SweepAxis& y, const std::string& quantity, const std::string& backend,
              const std::string& model_path, const std::string& out_path, int threads) {
    if (x.name == y.name)
        dqhe::raise(dqhe::errc::bad_config, "swept parameters must be distinct");
    if (x.steps < 2 || y.steps < 2)
        dqhe::raise(dqhe::errc::bad_config, "each axis needs at least 2 steps");
    const bool use_model = backend == "model";
    if (use_model && quantity != "F")
        dqhe::raise(dqhe::errc::bad_config, "the surrogate backend only predicts F");

    dqhe::NetworkModel model;
    if (use_model) model = dqhe::load_network(model_path);

    struct Cell {
        double xv, yv, value;
        bool ok;
        std::string detail;
    };
    const int total = x.steps * y.steps;
    std::vector<Cell> cells(static_cast<std::size_t>(total));
    dqhe::parallel_for(total, threads, [&](int idx) {
        const int i = idx / y.steps;
        const int j = idx % y.steps;
        dqhe::EngineParams p = base;
        const double xv = x.min + (x.max - x.min) * i / (x.steps - 1);
        const double yv = y.min + (y.max - y.min) * j / (y.steps - 1);
        *axis_target(p, x.name) = xv;
        *axis_target(p, y.name) = yv;
        Cell& cell = cells[static_cast<std::size_t>(idx)];
        cell.xv = xv;
        cell.yv = yv;
        try {
            if (use_model) {
                Eigen::VectorXd input(6);
                input << p.T_c0, p.T_h0, p.T_l, p.phi, p.p_h, p.p_c;
                cell.value = dqhe::forward(model, input);
            } else if (quantity == "affinity") {
                cell.value = dqhe::affinity(p, fcs);  // no counting-field stencil needed
            } else {
                cell.value = select_quantity(dqhe::cumulants(p, fcs), quantity);
            }
            cell.ok = true;
        } catch (const dqhe::error& e) {
            cell.value = std::numeric_limits<double>::quiet_NaN();
            cell.ok = false;
            cell.detail = dqhe::errc_name(e.code());
        }
    });

    std::string body;
    for (const auto& cell : cells) {
        body += fmt17(cell.xv);
        body += ' ';
        body += fmt17(cell.yv);
        body += ' ';
        body += fmt17(cell.value);
        body += ' ';
        body += cell.ok ? "ok" : cell.detail;
        body += '\n';
    }

    std::ostringstream header;
    header << "# dqhe-sweep v1\n";
    header << "# x " << x.name << " " << fmt17(x.min) << " " << fmt17(x.max) << " " << x.steps << "\n";
    header << "# y " << y.name << " " << fmt17(y.min) << " " << fmt17(y.max) << " " << y.steps << "\n";
    header << "# quantity " << quantity << "\n";
    header << "# backend " << backend << "\n";
    header << "# fixed Tc0=" << fmt17(base.T_c0) << " Th0=" << fmt17(base.T_h0)
           << " Tl=" << fmt17(base.T_l) << " phi=" << fmt17(base.phi) << " ph=" << fmt17(base.p_h)
           << " pc=" << fmt17(base.p_c) << " A0=" << fmt17(base.A0)
           << " omega=" << fmt17(base.omega) << " r=" << fmt17(base.r) << " g=" << fmt17(base.g)
           << "\n";
    header << "# columns x y value status\n";
    header << "# digest " << dqhe::fnv1a_digest(body) << "\n";

    if (out_path.empty() || out_path == "-") {
        std::cout << header.str() << body;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) dqhe::raise(dqhe::errc::io_error, "cannot open " + out_path + " for writing");
        out << header.str() << body;
        int failures = 0;
        for (const auto& cell : cells)
            if (!cell.ok) ++failures;
        std::cout << "wrote " << out_path << " (" << total << " cells, " << failures
                  << " flagged)\n";
    }
    return 0;
}

int run_generate(int count, std::uint64_t seed, const dqhe::FcsConfig& fcs,
                 const std::string& out_path, int threads) {
    const dqhe::Dataset ds = dqhe::generate(count, seed, fcs, {}, {}, threads);
    dqhe::save_dataset(ds, out_path);
    int ok = 0, flux = 0, failed = 0;
    for (const auto& rec : ds.records) {
        if (rec.status == dqhe::RecordStatus::ok) ++ok;
        else if (rec.status == dqhe::RecordStatus::zero_flux) ++flux;
        else ++failed;
    }
    std::cout << "records=" << count << " ok=" << ok << " zero_flux=" << flux
              << " solver_failure=" << failed << "\n";
    std::cout << "digest=" << ds.manifest.digest << "\n";
    const dqhe::DistributionStats stats = dqhe::distribution_stats(ds.records);
    std::cout << "label_mean=" << fmt6(stats.mean) << " label_mode=" << fmt6(stats.mode)
              << " frac_F_gt_1=" << fmt6(stats.frac_above_one)
              << " frac_F_lt_1=" << fmt6(stats.frac_below_one) << "\n";
    std::cout << "wrote " << out_path << " and " << out_path << ".manifest\n";
    return 0;
}

void print_metrics_table(const dqhe::TrainReport& report) {
    const auto row = [](const char* name, double a, double b, double c) {
        std::printf("%-8s %12s %12s %12s\n", name, fmt6(a).c_str(), fmt6(b).c_str(),
                    fmt6(c).c_str());
    };
    std::printf("%-8s %12s %12s %12s\n", "metric", "train", "validation", "test");
    row("MAE", report.final_train.mae, report.final_validation.mae, report.final_test.mae);
    row("MAPE", report.final_train.mape, report.final_validation.mape, report.final_test.mape);
    row("RMSE", report.final_train.rmse, report.final_validation.rmse, report.final_test.rmse);
    row("R2", report.final_train.r2, report.final_validation.r2, report.final_test.r2);
    row("MSE", report.final_train.mse, report.final_validation.mse, report.final_test.mse);
}

int run_train(const std::string& data_path, std::uint64_t seed, const dqhe::TrainConfig& base_cfg,
              int layers, int neurons, const std::string& out_path) {
    const dqhe::Dataset ds = dqhe::load_dataset(data_path);
    dqhe::TrainConfig cfg = base_cfg;
    cfg.seed = seed;
    cfg.hidden.assign(static_cast<std::size_t>(layers), neurons);
    const auto [model, report] = dqhe::train(ds, cfg);
    std::cout << "epochs=" << report.train_mse.size() << " proposals=" << report.steps.size()
              << " stop=" << dqhe::stop_reason_name(report.stop)
              << " best_epoch=" << report.best_epoch << "\n";
    print_metrics_table(report);
    if (!out_path.empty()) {
        dqhe::save_network(model, out_path);
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

int run_eval(const std::string& data_path, const std::string& model_path) {
    const dqhe::Dataset ds = dqhe::load_dataset(data_path);
    const dqhe::NetworkModel model = dqhe::load_network(model_path);
    auto collect = [&](dqhe::Split split) {
        std::vector<dqhe::SampleRecord> out;
        for (const auto& rec : ds.records)
            if (rec.status == dqhe::RecordStatus::ok && rec.split == split) out.push_back(rec);
        return out;
    };
    dqhe::TrainReport report;
    report.final_train = dqhe::metrics(model, collect(dqhe::Split::train));
    report.final_validation = dqhe::metrics(model, collect(dqhe::Split::validation));
    report.final_test = dqhe::metrics(model, collect(dqhe::Split::test));
    print_metrics_table(report);
    return 0;
}

int run_verify(const dqhe::FcsConfig& fcs) {
    const auto results = dqhe::run_invariant_suite(fcs);
    std::size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());
    int failures = 0;
    for (const auto& r : results) {
        std::printf("%-*s  %s  %s\n", static_cast<int>(width), r.name.c_str(),
                    r.pass ? "PASS" : "FAIL", r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu invariants hold\n", static_cast<int>(results.size()) - failures,
                results.size());
    return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"driven quantum heat engine: counting statistics and surrogate training"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_path;
    std::string model_path;
    int threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    app.add_option("--config", config_path, "key=value file with solver/training settings");
    app.add_option("--seed", seed, "seed for sampling, shuffling and initialization");
    app.add_option("--out", out_path, "output file path");
    app.add_option("--model", model_path, "trained model file");
    app.add_option("--threads", threads, "worker threads for sweeps and generation");

    dqhe::EngineParams point_params;
    CLI::App* point = app.add_subcommand("point", "evaluate cumulants at one parameter set");
    add_param_flags(point, point_params);

    dqhe::EngineParams sweep_params;
    SweepAxis ax, ay;
    std::string quantity = "F";
    std::string backend = "exact";
    CLI::App* sweep = app.add_subcommand("sweep", "grid sweep over two parameters");
    add_param_flags(sweep, sweep_params);
    sweep->add_option("--x", ax.name, "first swept parameter (Tc0, Th0, Tl, phi, ph, pc)")->required();
    sweep->add_option("--x-min", ax.min)->required();
    sweep->add_option("--x-max", ax.max)->required();
    sweep->add_option("--x-steps", ax.steps)->required();
    sweep->add_option("--y", ay.name, "second swept parameter")->required();
    sweep->add_option("--y-min", ay.min)->required();
    sweep->add_option("--y-max", ay.max)->required();
    sweep->add_option("--y-steps", ay.steps)->required();
    sweep->add_option("--quantity", quantity, "F, cd1, cd2, cg1, cg2, affinity or FA");
    sweep->add_option("--backend", backend, "exact or model")
        ->check(CLI::IsMember({"exact", "model"}));

    int gen_count = 3000;
    CLI::App* gen = app.add_subcommand("generate", "sample and label a dataset");
    gen->add_option("--count", gen_count, "number of records");

    std::string data_path;
    int train_layers = 4;
    int train_neurons = 20;
    CLI::App* train_cmd = app.add_subcommand("train", "train the surrogate network");
    train_cmd->add_option("--data", data_path, "dataset file")->required();
    train_cmd->add_option("--layers", train_layers, "hidden layer count");
    train_cmd->add_option("--neurons", train_neurons, "neurons per hidden layer");

    std::string eval_data;
    CLI::App* eval_cmd = app.add_subcommand("eval", "metric table for a trained model");
    eval_cmd->add_option("--data", eval_data, "dataset file")->required();

    app.add_subcommand("verify", "run the invariant suite");

    CLI11_PARSE(app, argc, argv);

    try {
        const CliConfig cfg = load_config(config_path);
        if (point->parsed()) return run_point(point_params, cfg.fcs);
        if (sweep->parsed())
            return run_sweep(sweep_params, cfg.fcs, ax, ay, quantity, backend, model_path,
                             out_path, threads);
        if (gen->parsed()) {
            if (out_path.empty()) dqhe::raise(dqhe::errc::bad_config, "generate needs --out");
            return run_generate(gen_count, seed, cfg.fcs, out_path, threads);
        }
        if (train_cmd->parsed())
            return run_train(data_path, seed, cfg.train, train_layers, train_neurons, out_path);
        if (eval_cmd->parsed()) {
            if (model_path.empty()) dqhe::raise(dqhe::errc::bad_config, "eval needs --model");
            return run_eval(eval_data, model_path);
        }
        return run_verify(cfg.fcs);
    } catch (const dqhe::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
