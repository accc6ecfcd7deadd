#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pacc/data/tables.hpp"
#include "pacc/train/checkpoint.hpp"
#include "pacc/train/predict.hpp"

namespace httplib {
class Server;
}

namespace pacc::serve {

// Immutable artifacts shared by all requests: the checkpoint, a live model
// instance, and the expression table projected onto the checkpoint's panel.
struct ServerContext {
  train::Checkpoint ckpt;
  std::shared_ptr<models::Encoder<float>> model;
  std::vector<std::string> cell_ids;
  std::vector<std::vector<double>> cell_expression;  // panel order

  static ServerContext load(const std::string& checkpoint_path,
                            const std::string& expression_path);

  // -1 when the cell id is unknown.
  int find_cell(const std::string& id) const;
};

// Routes: POST /v1/predict, GET /v1/health. Exposed for in-process tests;
// the returned server owns no context and must not outlive it.
std::shared_ptr<httplib::Server> make_server(const ServerContext& ctx);

// Blocking listen loop.
bool run_server(const ServerContext& ctx, const std::string& host, int port);

}  // namespace pacc::serve
