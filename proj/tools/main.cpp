#include <string>

#include "CLI11.hpp"
#include "bmr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Static instrumentation for bare-metal Cortex-M firmware images"};
  app.require_subcommand(1);

  bmr::CommandOptions opt;
  auto add_common = [&](CLI::App* sub, bool io_out) {
    sub->add_option("--config", opt.config_path, "tool configuration file");
    sub->add_option("--in", opt.input_path, "input firmware image (.bin)");
    if (io_out) sub->add_option("--out", opt.output_path, "output firmware image (.bin)");
    sub->add_option("--report", opt.report_path, "report file, stdout when omitted");
  };

  CLI::App* instrument =
      app.add_subcommand("instrument", "install hooks at the configured sites");
  add_common(instrument, true);

  CLI::App* verify = app.add_subcommand(
      "verify", "check an original/instrumented pair: --in original, --out instrumented");
  add_common(verify, true);

  CLI::App* inspect = app.add_subcommand("inspect", "decode and screen an image");
  add_common(inspect, false);
  inspect->add_option("--range", opt.range, "address window lo:hi to list");
  inspect->add_flag("--emit-config", opt.emit_config, "print a starter configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? bmr::kExitOk : bmr::kExitError;
  }

  if (instrument->parsed()) return bmr::run_instrument(opt);
  if (verify->parsed()) return bmr::run_verify(opt);
  return bmr::run_inspect(opt);
}
