// guidecap: guided caption-decoding experiments.
//
// Subcommands: train, caption, evaluate, gradcheck, ablate. See README.md
// for the config format and the file formats each command reads and writes.

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "guidecap/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"guided caption decoding"};
  app.require_subcommand(1);

  std::string config_path;
  auto* train = app.add_subcommand("train", "train a model from a run config");
  train->add_option("config", config_path, "run config file")->required();

  guidecap::CaptionArgs caption_args;
  auto* caption = app.add_subcommand("caption", "decode captions for a dataset file");
  caption->add_option("--checkpoint", caption_args.checkpoints,
                      "checkpoint file (repeat for an ensemble)")
      ->required();
  caption->add_option("--dataset", caption_args.dataset, "dataset file")->required();
  caption->add_option("--out", caption_args.out_path, "caption output file")->required();
  caption->add_flag("--greedy", caption_args.greedy, "greedy decoding instead of beam");
  caption->add_option("--beam", caption_args.beam_width, "beam width (default 3)");
  caption->add_option("--max-len", caption_args.max_len, "maximum caption length");
  caption->add_flag("--length-normalize", caption_args.length_normalize,
                    "rank beam results by per-token log probability");
  caption->add_option("--attributes", caption_args.attributes_path,
                      "attribute model file (predicted-attribute checkpoints)");

  guidecap::EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "score captions against references");
  evaluate->add_option("--captions", eval_args.captions, "caption file")->required();
  evaluate->add_option("--dataset", eval_args.dataset, "reference dataset file")->required();
  evaluate->add_option("--out", eval_args.out_path, "report output file");

  std::string gradcheck_config;
  double gradcheck_tolerance = -1.0;
  auto* gradcheck = app.add_subcommand("gradcheck", "backward pass vs finite differences");
  gradcheck->add_option("config", gradcheck_config, "run config file")->required();
  gradcheck->add_option("--tolerance", gradcheck_tolerance, "override the config tolerance");

  std::string ablate_config;
  auto* ablate = app.add_subcommand("ablate", "guiding-input ablation arms and lambda sweep");
  ablate->add_option("config", ablate_config, "run config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 1;
  }

  if (train->parsed()) return guidecap::cmd_train(config_path);
  if (caption->parsed()) return guidecap::cmd_caption(caption_args);
  if (evaluate->parsed()) return guidecap::cmd_evaluate(eval_args);
  if (gradcheck->parsed()) return guidecap::cmd_gradcheck(gradcheck_config, gradcheck_tolerance);
  if (ablate->parsed()) return guidecap::cmd_ablate(ablate_config);
  return 1;
}
