#include "pacc/serve/server.hpp"

#include <algorithm>
#include <map>

#include "httplib.h"
#include "json.hpp"
#include "pacc/chem/mol.hpp"
#include "pacc/version.hpp"

namespace pacc::serve {

using nlohmann::json;

ServerContext ServerContext::load(const std::string& checkpoint_path,
                                  const std::string& expression_path) {
  ServerContext ctx;
  ctx.ckpt = train::Checkpoint::load(checkpoint_path);
  ctx.model = std::make_shared<models::Encoder<float>>(ctx.ckpt.instantiate());

  data::ExpressionTable table = data::load_expression_tsv(expression_path);
  std::map<std::string, int> gene_col;
  for (size_t c = 0; c < table.genes.size(); ++c)
    gene_col[table.genes[c]] = static_cast<int>(c);
  std::vector<int> cols;
  for (const auto& gene : ctx.ckpt.panel) {
    auto it = gene_col.find(gene);
    if (it == gene_col.end())
      throw Error("MissingGene", "panel gene '" + gene + "' absent from the expression table");
    cols.push_back(it->second);
  }
  ctx.cell_ids = table.cells;
  ctx.cell_expression.reserve(table.cells.size());
  for (const auto& row : table.values) {
    std::vector<double> projected(cols.size());
    for (size_t p = 0; p < cols.size(); ++p) projected[p] = row[static_cast<size_t>(cols[p])];
    ctx.cell_expression.push_back(std::move(projected));
  }
  return ctx;
}

int ServerContext::find_cell(const std::string& id) const {
  for (size_t i = 0; i < cell_ids.size(); ++i)
    if (cell_ids[i] == id) return static_cast<int>(i);
  return -1;
}

namespace {

void reply_error(httplib::Response& res, int status, const std::string& code,
                 const std::string& detail) {
  json body = {{"error", code}, {"detail", detail}};
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void handle_predict(const ServerContext& ctx, const httplib::Request& req,
                    httplib::Response& res) {
  if (req.get_header_value("Content-Type").find("application/json") == std::string::npos)
    return reply_error(res, 400, "UnsupportedContentType", "expected application/json");

  json body;
  try {
    body = json::parse(req.body);
  } catch (const json::exception& e) {
    return reply_error(res, 400, "MalformedJson", e.what());
  }
  if (!body.contains("smiles") || !body["smiles"].is_string())
    return reply_error(res, 400, "MissingSmiles", "request needs a 'smiles' string");

  const bool has_cell = body.contains("cell_id");
  const bool has_expr = body.contains("expression");
  if (has_cell == has_expr)
    return reply_error(res, 400, "AmbiguousCellSpec",
                       "exactly one of 'cell_id' or 'expression' must be present");

  std::vector<double> expression;
  if (has_cell) {
    if (!body["cell_id"].is_string())
      return reply_error(res, 400, "MalformedCellId", "'cell_id' must be a string");
    const int row = ctx.find_cell(body["cell_id"].get<std::string>());
    if (row < 0)
      return reply_error(res, 404, "UnknownCellId",
                         "cell '" + body["cell_id"].get<std::string>() + "' not loaded");
    expression = ctx.cell_expression[static_cast<size_t>(row)];
  } else {
    if (!body["expression"].is_array())
      return reply_error(res, 422, "MalformedExpression", "'expression' must be an array");
    for (const auto& v : body["expression"]) {
      if (!v.is_number())
        return reply_error(res, 422, "MalformedExpression", "expression values must be numbers");
      expression.push_back(v.get<double>());
    }
    if (expression.size() != ctx.ckpt.panel.size())
      return reply_error(res, 422, "PanelMismatch",
                         "expression length " + std::to_string(expression.size()) +
                             " != panel size " + std::to_string(ctx.ckpt.panel.size()));
  }

  int top_k = 10;
  if (body.contains("top_k_genes")) {
    if (!body["top_k_genes"].is_number_integer() || body["top_k_genes"].get<int>() < 1)
      return reply_error(res, 400, "InvalidTopK", "'top_k_genes' must be a positive integer");
    top_k = body["top_k_genes"].get<int>();
  }
  top_k = std::min<int>(top_k, static_cast<int>(ctx.ckpt.panel.size()));

  train::SinglePrediction pred;
  try {
    pred = train::predict_single(ctx.ckpt, *ctx.model, body["smiles"].get<std::string>(),
                                 expression);
  } catch (const chem::ParseError& e) {
    return reply_error(res, 400, e.code(), e.what());
  } catch (const Error& e) {
    if (e.code() == "PanelMismatch") return reply_error(res, 422, e.code(), e.what());
    if (e.code() == "TokenizationGap" || e.code() == "EmptyInput")
      return reply_error(res, 400, e.code(), e.what());
    return reply_error(res, 500, e.code(), e.what());
  }

  json gene_attention = json::array();
  if (!pred.gene_attention.empty()) {
    std::vector<int> order(pred.gene_attention.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (pred.gene_attention[a] != pred.gene_attention[b])
        return pred.gene_attention[a] > pred.gene_attention[b];
      return ctx.ckpt.panel[a] < ctx.ckpt.panel[b];
    });
    for (int i = 0; i < top_k && i < static_cast<int>(order.size()); ++i)
      gene_attention.push_back(
          {{"gene", ctx.ckpt.panel[order[i]]}, {"weight", pred.gene_attention[order[i]]}});
  }

  json token_attention = json::array();
  for (size_t t = 0; t < pred.token_attention.size(); ++t)
    token_attention.push_back({{"token", pred.tokens[t]}, {"weight", pred.token_attention[t]}});

  json out = {{"ic50_log", pred.ic50_log},
              {"ic50_normalized", pred.ic50_normalized},
              {"canonical_smiles", pred.canonical},
              {"gene_attention", gene_attention},
              {"token_attention", token_attention}};
  res.status = 200;
  res.set_content(out.dump(), "application/json");
}

}  // namespace

std::shared_ptr<httplib::Server> make_server(const ServerContext& ctx) {
  auto server = std::make_shared<httplib::Server>();

  server->Get("/v1/health", [&ctx](const httplib::Request&, httplib::Response& res) {
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(ctx.ckpt.manifest_hash()));
    json body = {{"status", "ok"},
                 {"version", kVersion},
                 {"model", models::kind_name(ctx.ckpt.spec.kind)},
                 {"step", ctx.ckpt.step},
                 {"checkpoint_hash", hash}};
    res.set_content(body.dump(), "application/json");
  });

  server->Post("/v1/predict", [&ctx](const httplib::Request& req, httplib::Response& res) {
    handle_predict(ctx, req, res);
  });

  return server;
}

bool run_server(const ServerContext& ctx, const std::string& host, int port) {
  auto server = make_server(ctx);
  return server->listen(host, port);
}

}  // namespace pacc::serve
