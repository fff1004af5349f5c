#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>

using namespace perfstop::cli;

namespace {

void add_output_flags(CLI::App* cmd, OutputOptions& out, bool with_format) {
    if (with_format) {
        const std::map<std::string, Format> formats{{"csv", Format::csv}, {"json", Format::json}};
        cmd->add_option("--format", out.format, "csv or json")->transform(CLI::CheckedTransformer(formats))->option_text("csv|json [csv]");
        cmd->add_flag("--paper-rounding", out.paper_rounding, "round CSV estimates to 2 decimals");
    }
    cmd->add_option("--out", out.out, "output file (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Perfect stopping rule: regret tables, tree checks and rule application"};
    app.require_subcommand(1);

    OutputOptions out;
    std::string lambdas_text = "0.1,1,10,50,100,1000";
    std::string ps_text = "0.2,0.4,0.6,0.8";
    std::string qs_text = "1.1,2,4,6,8,10";

    Table1Config t1;
    auto* table1 = app.add_subcommand("table1", "expected realized regret for p = 1/2 over lambda");
    table1->add_option("--lambdas", lambdas_text, "comma-separated Poisson intensities")->capture_default_str();
    table1->add_option("--p", t1.p, "probability of the upward slope")->capture_default_str();
    table1->add_option("--L1", t1.L1)->capture_default_str();
    table1->add_option("--L2", t1.L2)->capture_default_str();
    table1->add_option("--T", t1.T, "horizon")->capture_default_str();
    table1->add_option("--n-paths", t1.n_paths)->capture_default_str();
    table1->add_option("--seed", t1.seed)->capture_default_str();
    table1->add_option("--threads", t1.threads, "0: hardware concurrency")->capture_default_str();
    add_output_flags(table1, out, true);

    Table2Config t2;
    auto* table2 = app.add_subcommand("table2", "expected realized regret over p at fixed lambda");
    table2->add_option("--ps", ps_text, "comma-separated upward-slope probabilities")->capture_default_str();
    table2->add_option("--lambda", t2.lambda)->capture_default_str();
    table2->add_option("--L1", t2.L1)->capture_default_str();
    table2->add_option("--L2", t2.L2)->capture_default_str();
    table2->add_option("--T", t2.T, "horizon")->capture_default_str();
    table2->add_option("--n-paths", t2.n_paths)->capture_default_str();
    table2->add_option("--seed", t2.seed)->capture_default_str();
    table2->add_option("--threads", t2.threads, "0: hardware concurrency")->capture_default_str();
    add_output_flags(table2, out, true);

    Table3Config t3;
    auto* table3 = app.add_subcommand("table3", "q-mean thresholds z_q and quantile levels delta");
    table3->add_option("--qs", qs_text, "comma-separated q values")->capture_default_str();
    table3->add_option("--sigma", t3.sigma)->capture_default_str();
    add_output_flags(table3, out, true);

    VerifyConfig vc;
    auto* verify = app.add_subcommand("verify", "exhaustive perfection check on random scenario trees");
    verify->add_option("--trees", vc.trees)->capture_default_str();
    verify->add_option("--max-depth", vc.max_depth)->capture_default_str();
    verify->add_option("--max-branching", vc.max_branching)->capture_default_str();
    verify->add_option("--seed", vc.seed)->capture_default_str();
    add_output_flags(verify, out, false);

    ApplyConfig ac;
    auto* apply = app.add_subcommand("apply", "apply the perfect rule to a t,price CSV");
    apply->add_option("--csv", ac.csv_path)->required();
    apply->add_option("--forecast", ac.forecast_json, "forecast JSON, or @file")->required();
    add_output_flags(apply, out, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; every other parse failure is a usage error
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        t1.lambdas = parse_list(lambdas_text, "--lambdas");
        t2.ps = parse_list(ps_text, "--ps");
        t3.qs = parse_list(qs_text, "--qs");
        if (*table1) emit_table(run_table1(t1), out, std::cout);
        if (*table2) emit_table(run_table2(t2), out, std::cout);
        if (*table3) emit_table(run_table3(t3), out, std::cout);
        if (*verify) {
            const auto summary = run_verify(vc);
            emit_json(summary, out.out, std::cout);
            if (!summary.at("passed").get<bool>()) return 7;
        }
        if (*apply) emit_json(run_apply(ac), out.out, std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
    return 0;
}
