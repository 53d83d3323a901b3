// Stand-in trainer for demos and end-to-end tests: answers every suggestion
// with reward = -(lr - target)^2 where lr is the suggested value of the
// dimension named by --param. Exits cleanly when the tuner sends stop.

#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hyperctl/protocol.hpp"

int main(int argc, char** argv) {
  CLI::App app{"echo_trainer: scripted trainer speaking the hyperctl wire protocol"};
  std::string param = "lr";
  double target = 0.01;
  app.add_option("--param", param, "hyperparameter the objective depends on");
  app.add_option("--target", target, "objective peak location");
  CLI11_PARSE(app, argc, argv);

  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    hyperctl::WireMessage msg;
    try {
      msg = hyperctl::parse_wire_message(line);
    } catch (const std::exception& e) {
      std::cerr << "echo_trainer: " << e.what() << "\n";
      return 1;
    }
    switch (msg.type) {
      case hyperctl::WireMessage::Type::suggest: {
        if (!msg.config.contains(param)) {
          std::cerr << "echo_trainer: suggestion lacks parameter '" << param << "'\n";
          return 1;
        }
        const double value = msg.config.at(param).get<double>();
        const double reward = -(value - target) * (value - target);
        std::cout << hyperctl::reward_line(msg.iteration, reward) << std::endl;
        break;
      }
      case hyperctl::WireMessage::Type::stop:
        return 0;
      case hyperctl::WireMessage::Type::init:
        break;  // informational
      case hyperctl::WireMessage::Type::error:
        std::cerr << "echo_trainer: tuner reported: " << msg.payload.dump() << "\n";
        break;
      default:
        std::cerr << "echo_trainer: unexpected message type\n";
        return 1;
    }
  }
  return 0;
}
