#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "aicl/error.hpp"
#include "aicl/pipeline.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

std::string config_path_or_env(const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (const char* env = std::getenv("AICL_CONFIG"); env && *env) {
        return env;
    }
    throw CLI::RequiredError("--config (or AICL_CONFIG)");
}

void print_run(const aicl::RunResult& r) {
    std::cout << "run " << r.header.strategy << ": " << r.records.size() << " records, " << r.skipped.size()
              << " skipped" << (r.header.valid ? "" : " (INVALID: too many skipped)") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive in-context learning pipeline"};
    app.require_subcommand(1, 1);

    std::string config_flag;
    app.add_option("-c,--config", config_flag, "Pipeline config (JSON); defaults to $AICL_CONFIG")
        ->check(CLI::ExistingFile);

    auto* ingest = app.add_subcommand("ingest", "Parse the raw dataset into train/test splits");
    auto* index = app.add_subcommand("index", "Build the BM25 index over the training split");
    auto* calibrate = app.add_subcommand("calibrate", "Compute the NQC normalisation constant");
    auto* build_gt = app.add_subcommand("build-gt", "Label training instances with their optimal k");
    auto* train_k = app.add_subcommand("train-k", "Train the k classifier");
    auto* run = app.add_subcommand("run", "Run one strategy over the test split");
    std::string strategy;
    run->add_option("-s,--strategy", strategy, "zero | static:<k> | qpp | saicl")->required();
    auto* eval = app.add_subcommand("eval", "Score run files");
    std::string eval_name;
    eval->add_option("-r,--run", eval_name, "Strategy name of the run file (default: all)");
    auto* compare = app.add_subcommand("compare", "Tabulate every report");
    for (auto* sub : app.get_subcommands({})) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const auto extra = app.remaining();
        if (!extra.empty() && extra.front().rfind("-", 0) != 0) {
            std::cerr << "aicl: error: unknown subcommand \"" << extra.front() << "\"\n";
        } else {
            app.exit(e);
        }
        return kExitUsage;
    }

    try {
        aicl::Pipeline pipe(aicl::PipelineConfig::load(config_path_or_env(config_flag)));
        std::cerr << "aicl: " << pipe.banner() << "\n";

        if (ingest->parsed()) {
            const auto r = pipe.ingest();
            std::cout << "ingest: " << r.train.size() << " train, " << r.test.size() << " test -> "
                      << pipe.work_dir().string() << "\n";
        } else if (index->parsed()) {
            const auto idx = pipe.build_index();
            std::cout << "index: " << idx.num_docs() << " docs, " << idx.vocabulary_size() << " terms\n";
        } else if (calibrate->parsed()) {
            const auto cal = pipe.calibrate();
            std::cout << "calibrate: norm_constant " << cal.norm_constant << " over " << cal.sample_size
                      << " queries\n";
        } else if (build_gt->parsed()) {
            const auto gt = pipe.build_ground_truth();
            std::cout << "build-gt: " << gt.labels.size() << " labels, " << gt.incomplete.size() << " incomplete\n";
            const auto hist = aicl::k_star_histogram(gt.labels, pipe.config().M);
            for (std::size_t k = 0; k < hist.size(); ++k) {
                std::cout << "  k*=" << k << ": " << hist[k] << "\n";
            }
        } else if (train_k->parsed()) {
            const auto model = pipe.train_k();
            std::cout << "train-k: " << model.training_meta.num_examples << " examples, loss "
                      << model.training_meta.initial_loss << " -> " << model.training_meta.final_loss << "\n";
        } else if (run->parsed()) {
            print_run(pipe.run(strategy));
        } else if (eval->parsed()) {
            const auto reports =
                pipe.eval(eval_name.empty() ? std::nullopt : std::optional<std::string>(eval_name));
            for (const auto& r : reports) {
                std::cout << "eval " << r.method << " k=" << aicl::format_k(r.report.avg_k)
                          << " F=" << r.report.macro_f1 << " AIS=" << r.report.ais << "\n";
            }
        } else if (compare->parsed()) {
            std::cout << pipe.compare().text;
        }
    } catch (const aicl::MissingStageError& e) {
        std::cerr << "aicl: error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const CLI::RequiredError& e) {
        std::cerr << "aicl: error: missing " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "aicl: error: " << e.what() << "\n";
        return kExitError;
    }
    return 0;
}
