// lattice-bert command line: build-vocab, lattice, make-instances,
// train-toy, attn-summary.
//
// Exit codes: 0 success, 2 input error, 3 config/shape error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lattice_bert/pipeline.hpp"

namespace lb = lattice_bert;

namespace {

// LATTICE_BERT_LOG: "quiet" silences summaries, anything else keeps them on stderr.
std::ostream& log_stream() {
  static std::ostringstream sink;
  const char* level = std::getenv("LATTICE_BERT_LOG");
  if (level && std::string(level) == "quiet") return sink;
  return std::cerr;
}

int run(const std::string& command, lb::PipelineConfig& cfg) {
  auto& log = log_stream();
  try {
    if (command == "build-vocab") {
      lb::cmd_build_vocab(cfg, log);
    } else if (command == "lattice") {
      lb::cmd_lattice(cfg, log);
    } else if (command == "make-instances") {
      lb::cmd_make_instances(cfg, log);
    } else if (command == "train-toy") {
      const auto s = lb::cmd_train_toy(cfg, log);
      if (cfg.grad_check) std::cout << "grad-check max relative error " << s.grad_check_max_rel_error << "\n";
    } else if (command == "attn-summary") {
      if (cfg.output.empty()) {
        lb::cmd_attn_summary(cfg, std::cout);
      } else {
        std::ofstream out(cfg.output, std::ios::binary);
        if (!out) throw lb::InputError("cannot write '" + cfg.output.string() + "'");
        lb::cmd_attn_summary(cfg, out);
      }
    }
  } catch (const lb::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lb::kExitInput;
  } catch (const lb::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lb::kExitConfig;
  } catch (const lb::PositionOverflow& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lb::kExitConfig;
  } catch (const lb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lb::kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return lb::kExitInput;
  }
  return lb::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice-BERT word-lattice toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file; flags given on the command line win");

  lb::PipelineConfig cfg;
  std::string format = "text";
  app.add_option("--input", cfg.input, "Corpus file or directory, line file, or instance directory");
  app.add_option("--vocab", cfg.vocab, "Vocabulary file");
  app.add_option("--output", cfg.output, "Output file or directory");
  app.add_option("--words", cfg.words, "Word frequency list (build-vocab)");
  app.add_option("--max-words", cfg.max_words, "Multi-character words kept (build-vocab)");
  app.add_option("--preset", cfg.preset, "Encoder preset")->check(CLI::IsMember({"base", "lite", "toy"}));
  app.add_option("--phase", cfg.phase, "Packing phase: 1 = 128/173, 2 = 512/692")->check(CLI::IsMember({1, 2}));
  app.add_option("--mask-ratio", cfg.mask_ratio, "Target fraction of masked tokens, in (0, 1)");
  app.add_option("--seed", cfg.seed, "Global seed");
  app.add_option("--shards", cfg.shards, "Number of shards");
  app.add_option("--format", format, "Instance format")->check(CLI::IsMember({"text", "binary"}));
  app.add_option("--steps", cfg.steps, "Training steps (train-toy)");
  app.add_option("--batch-size", cfg.batch_size, "Instances per step (train-toy)");
  app.add_option("--lr", cfg.learning_rate, "Peak learning rate (train-toy)");
  app.add_option("--resume", cfg.resume, "Checkpoint to continue from (train-toy)");
  app.add_flag("--grad-check", cfg.grad_check, "Finite-difference check before training (train-toy)");
  app.add_option("--checkpoint", cfg.checkpoint, "Checkpoint (attn-summary)");
  app.add_option("--text", cfg.text, "Sentence (attn-summary)");

  const char* commands[][2] = {
      {"build-vocab", "Build a vocabulary from a corpus"},
      {"lattice", "Write one lattice record per input line"},
      {"make-instances", "Pack a corpus into masked pre-training instances"},
      {"train-toy", "Train an encoder preset on instance files"},
      {"attn-summary", "Mean attention received by each lattice token"},
  };
  for (const auto& c : commands) app.add_subcommand(c[0], c[1])->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return lb::kExitConfig;
  }
  cfg.format = format == "text" ? lb::InstanceFormat::text : lb::InstanceFormat::binary;
  return run(app.get_subcommands().front()->get_name(), cfg);
}
