#include "cli/io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace causalis::cli {

namespace {

[[noreturn]] void fail(const std::string &path, const std::string &what) {
  throw InputError(path + ": " + what);
}

const json &field(const json &j, const char *key, const std::string &path) {
  if (!j.is_object())
    fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end())
    fail(path, std::string("missing key \"") + key + "\"");
  return *it;
}

std::string key_path(const std::string &path, const char *key) {
  return path + "." + key;
}

std::string item_path(const std::string &path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

const json &array(const json &j, const std::string &path) {
  if (!j.is_array())
    fail(path, "expected an array");
  return j;
}

double number(const json &j, const std::string &path) {
  if (!j.is_number())
    fail(path, "expected a number");
  return j.get<double>();
}

Index positive(const json &j, const std::string &path) {
  if (!j.is_number_integer() || j.get<long long>() < 1)
    fail(path, "expected a positive integer");
  return static_cast<Index>(j.get<long long>());
}

std::vector<Index> positive_list(const json &j, const std::string &path) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < array(j, path).size(); ++i)
    out.push_back(positive(j[i], item_path(path, i)));
  return out;
}

cplx complex_entry(const json &j, const std::string &path) {
  if (j.is_number())
    return j.get<double>();
  if (!j.is_array() || j.size() != 2)
    fail(path, "expected [re, im]");
  return {number(j[0], item_path(path, 0)), number(j[1], item_path(path, 1))};
}

// Nested arrays with the given shape, flattened row-major.
template <typename T, typename F>
json nest(const std::vector<Index> &shape, const std::vector<T> &flat, F &&conv) {
  std::function<json(std::size_t, std::size_t)> rec = [&](std::size_t level,
                                                         std::size_t offset) {
    if (level == shape.size())
      return json(conv(flat[offset]));
    std::size_t stride = 1;
    for (std::size_t k = level + 1; k < shape.size(); ++k)
      stride *= static_cast<std::size_t>(shape[k]);
    json arr = json::array();
    for (Index i = 0; i < shape[level]; ++i)
      arr.push_back(rec(level + 1, offset + static_cast<std::size_t>(i) * stride));
    return arr;
  };
  return rec(0, 0);
}

template <typename F>
void unnest(const json &j, const std::vector<Index> &shape, const std::string &path, F &&leaf) {
  std::function<void(const json &, std::size_t, const std::string &)> rec =
      [&](const json &x, std::size_t level, const std::string &p) {
        if (level == shape.size()) {
          leaf(x, p);
          return;
        }
        if (!x.is_array() || static_cast<Index>(x.size()) != shape[level])
          fail(p, "expected an array of length " + std::to_string(shape[level]));
        for (std::size_t i = 0; i < x.size(); ++i)
          rec(x[i], level + 1, item_path(p, i));
      };
  rec(j, 0, path);
}

std::size_t untrusted_parties(Scenario s) {
  switch (s) {
  case Scenario::TUU:
  case Scenario::UUT:
    return 2;
  default:
    return 1;
  }
}

std::vector<Index> concat(std::vector<Index> a, const std::vector<Index> &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::vector<LabeledOperator> operator_list(const json &j, const std::string &path) {
  std::vector<LabeledOperator> out;
  for (std::size_t i = 0; i < array(j, path).size(); ++i)
    out.push_back(operator_from_json(j[i], item_path(path, i)));
  return out;
}

json operator_list_json(const std::vector<LabeledOperator> &ops) {
  json arr = json::array();
  for (const auto &op : ops)
    arr.push_back(to_json(op));
  return arr;
}

} // namespace

json to_json(const SpaceLabel &l) { return {{"name", l.name}, {"dim", l.dim}}; }

json to_json(const TensorSpace &s) {
  json arr = json::array();
  for (const auto &f : s.factors())
    arr.push_back(to_json(f));
  return arr;
}

json to_json(const LabeledOperator &op) {
  json rows = json::array();
  const auto &m = op.matrix();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c)
      row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return {{"factors", to_json(op.space())}, {"matrix", std::move(rows)}};
}

json to_json(const InstrumentSet &set) {
  json el = json::array();
  for (const auto &row : set.elements)
    el.push_back(operator_list_json(row));
  return {{"input", to_json(set.input)},
          {"output", to_json(set.output)},
          {"settings", set.settings()},
          {"outcomes", set.outcomes()},
          {"elements", std::move(el)}};
}

json to_json(const POVMSet &set) {
  json el = json::array();
  for (const auto &row : set.elements)
    el.push_back(operator_list_json(row));
  return {{"space", to_json(set.space)},
          {"settings", set.settings()},
          {"outcomes", set.outcomes()},
          {"elements", std::move(el)}};
}

json to_json(const Behaviour &b) {
  return {{"arity", b.tripartite() ? "tripartite" : "bipartite"},
          {"settings", b.settings},
          {"outcomes", b.outcomes},
          {"p", nest(concat(b.settings, b.outcomes), b.p, [](double v) { return v; })}};
}

json to_json(const Assemblage &w) {
  const auto shape = concat(w.settings, w.outcomes);
  return {{"scenario", to_string(w.scenario)},
          {"trusted_factors", to_json(w.trusted)},
          {"index_shape", shape},
          {"elements", nest(shape, w.elements, [](const LabeledOperator &op) { return to_json(op); })}};
}

json to_json(const ResidualReport &r) {
  json items = json::object();
  for (const auto &i : r.items)
    items[i.name] = i.value;
  return {{"items", std::move(items)},
          {"worst", r.worst()},
          {"min_eigenvalue", r.min_eigenvalue},
          {"passed", r.passed}};
}

json to_json(const CausalDecomposition &d) {
  return {{"q", d.q}, {"first", to_json(d.first)}, {"second", to_json(d.second)}, {"slack", d.slack}};
}

json to_json(const CausalWitness &w) {
  return {{"S", to_json(w.S)}, {"normalization", w.normalization}, {"value", w.value}};
}

json to_json(const CausalBehaviourDecomposition &d) {
  return {{"q", d.q}, {"first", to_json(d.first)}, {"second", to_json(d.second)}};
}

json to_json(const AssemblageDecomposition &d) {
  return {{"q", d.q}, {"first", operator_list_json(d.first)}, {"second", operator_list_json(d.second)}};
}

json to_json(const Devices &d) {
  json j = json::object();
  if (d.alice)
    j["alice"] = to_json(*d.alice);
  if (d.bob)
    j["bob"] = to_json(*d.bob);
  if (d.charlie)
    j["charlie"] = to_json(*d.charlie);
  return j;
}

SpaceLabel label_from_json(const json &j, const std::string &path) {
  const json &name = field(j, "name", path);
  if (!name.is_string() || name.get<std::string>().empty())
    fail(key_path(path, "name"), "expected a nonempty string");
  return {name.get<std::string>(), positive(field(j, "dim", path), key_path(path, "dim"))};
}

LabeledOperator operator_from_json(const json &j, const std::string &path) {
  const std::string fp = key_path(path, "factors");
  const json &factors = array(field(j, "factors", path), fp);
  std::vector<SpaceLabel> labels;
  for (std::size_t i = 0; i < factors.size(); ++i)
    labels.push_back(label_from_json(factors[i], item_path(fp, i)));
  TensorSpace space;
  try {
    space = TensorSpace(labels);
  } catch (const LabelError &e) {
    fail(fp, e.what());
  }
  const Index d = space.dim();
  const std::string mp = key_path(path, "matrix");
  const json &rows = array(field(j, "matrix", path), mp);
  if (static_cast<Index>(rows.size()) != d)
    fail(mp, "expected " + std::to_string(d) + " rows");
  MatrixC m(d, d);
  for (Index r = 0; r < d; ++r) {
    const std::string rp = item_path(mp, static_cast<std::size_t>(r));
    const json &row = array(rows[r], rp);
    if (static_cast<Index>(row.size()) != d)
      fail(rp, "expected " + std::to_string(d) + " entries");
    for (Index c = 0; c < d; ++c)
      m(r, c) = complex_entry(row[c], item_path(rp, static_cast<std::size_t>(c)));
  }
  return {space, std::move(m)};
}

InstrumentSet instruments_from_json(const json &j, const std::string &path) {
  const SpaceLabel in = label_from_json(field(j, "input", path), key_path(path, "input"));
  const SpaceLabel out = label_from_json(field(j, "output", path), key_path(path, "output"));
  if (in.name == out.name)
    fail(path, "input and output labels coincide");
  const Index settings = positive(field(j, "settings", path), key_path(path, "settings"));
  const Index outcomes = positive(field(j, "outcomes", path), key_path(path, "outcomes"));
  const TensorSpace space{in, out};
  std::vector<std::vector<MatrixC>> m;
  unnest(field(j, "elements", path), {settings, outcomes}, key_path(path, "elements"),
         [&](const json &e, const std::string &p) {
           const LabeledOperator op = operator_from_json(e, p);
           if (!(op.space() == space))
             fail(p, "element does not live on (input, output)");
           if (m.empty() || static_cast<Index>(m.back().size()) == outcomes)
             m.emplace_back();
           m.back().push_back(op.matrix());
         });
  return InstrumentSet(in, out, m);
}

POVMSet povm_from_json(const json &j, const std::string &path) {
  const SpaceLabel s = label_from_json(field(j, "space", path), key_path(path, "space"));
  const Index settings = positive(field(j, "settings", path), key_path(path, "settings"));
  const Index outcomes = positive(field(j, "outcomes", path), key_path(path, "outcomes"));
  std::vector<std::vector<MatrixC>> m;
  unnest(field(j, "elements", path), {settings, outcomes}, key_path(path, "elements"),
         [&](const json &e, const std::string &p) {
           const LabeledOperator op = operator_from_json(e, p);
           if (!(op.space() == TensorSpace{s}))
             fail(p, "element does not live on the POVM space");
           if (m.empty() || static_cast<Index>(m.back().size()) == outcomes)
             m.emplace_back();
           m.back().push_back(op.matrix());
         });
  return POVMSet(s, m);
}

bool is_povm_json(const json &j) { return j.is_object() && j.contains("space"); }

Behaviour behaviour_from_json(const json &j, const std::string &path) {
  const json &arity = field(j, "arity", path);
  std::size_t parties = 0;
  if (arity == "bipartite")
    parties = 2;
  else if (arity == "tripartite")
    parties = 3;
  else
    fail(key_path(path, "arity"), "expected \"bipartite\" or \"tripartite\"");
  auto settings = positive_list(field(j, "settings", path), key_path(path, "settings"));
  auto outcomes = positive_list(field(j, "outcomes", path), key_path(path, "outcomes"));
  if (settings.size() != parties)
    fail(key_path(path, "settings"), "expected " + std::to_string(parties) + " entries");
  if (outcomes.size() != parties)
    fail(key_path(path, "outcomes"), "expected " + std::to_string(parties) + " entries");
  Behaviour b(settings, outcomes);
  std::size_t k = 0;
  unnest(field(j, "p", path), concat(settings, outcomes), key_path(path, "p"),
         [&](const json &v, const std::string &p) { b.p[k++] = number(v, p); });
  return b;
}

Assemblage assemblage_from_json(const json &j, const std::string &path) {
  Assemblage w;
  const json &sc = field(j, "scenario", path);
  try {
    w.scenario = scenario_from_string(sc.is_string() ? sc.get<std::string>() : "");
  } catch (const std::exception &) {
    fail(key_path(path, "scenario"), "unknown scenario");
  }
  const std::string tp = key_path(path, "trusted_factors");
  std::vector<SpaceLabel> labels;
  const json &tf = array(field(j, "trusted_factors", path), tp);
  for (std::size_t i = 0; i < tf.size(); ++i)
    labels.push_back(label_from_json(tf[i], item_path(tp, i)));
  try {
    w.trusted = TensorSpace(labels);
  } catch (const LabelError &e) {
    fail(tp, e.what());
  }
  const std::string sp = key_path(path, "index_shape");
  const auto shape = positive_list(field(j, "index_shape", path), sp);
  const std::size_t n = untrusted_parties(w.scenario);
  if (shape.size() != 2 * n)
    fail(sp, "expected " + std::to_string(2 * n) + " entries for this scenario");
  w.settings.assign(shape.begin(), shape.begin() + n);
  w.outcomes.assign(shape.begin() + n, shape.end());
  unnest(field(j, "elements", path), shape, key_path(path, "elements"),
         [&](const json &e, const std::string &p) {
           LabeledOperator op = operator_from_json(e, p);
           if (!(op.space() == w.trusted))
             fail(p, "element does not live on the trusted factors");
           w.elements.push_back(std::move(op));
         });
  return w;
}

CausalDecomposition decomposition_from_json(const json &j, const std::string &path) {
  CausalDecomposition d;
  d.q = number(field(j, "q", path), key_path(path, "q"));
  d.first = operator_from_json(field(j, "first", path), key_path(path, "first"));
  d.second = operator_from_json(field(j, "second", path), key_path(path, "second"));
  if (j.contains("slack"))
    d.slack = number(j["slack"], key_path(path, "slack"));
  return d;
}

CausalWitness witness_from_json(const json &j, const std::string &path) {
  CausalWitness w;
  w.S = operator_from_json(field(j, "S", path), key_path(path, "S"));
  w.normalization = number(field(j, "normalization", path), key_path(path, "normalization"));
  w.value = number(field(j, "value", path), key_path(path, "value"));
  return w;
}

CausalBehaviourDecomposition behaviour_decomposition_from_json(const json &j,
                                                               const std::string &path) {
  CausalBehaviourDecomposition d;
  d.q = number(field(j, "q", path), key_path(path, "q"));
  d.first = behaviour_from_json(field(j, "first", path), key_path(path, "first"));
  d.second = behaviour_from_json(field(j, "second", path), key_path(path, "second"));
  return d;
}

AssemblageDecomposition assemblage_decomposition_from_json(const json &j,
                                                           const std::string &path) {
  AssemblageDecomposition d;
  d.q = number(field(j, "q", path), key_path(path, "q"));
  d.first = operator_list(field(j, "first", path), key_path(path, "first"));
  d.second = operator_list(field(j, "second", path), key_path(path, "second"));
  return d;
}

Devices devices_from_json(const json &j, const std::string &path) {
  if (!j.is_object())
    fail(path, "expected an object");
  Devices d;
  if (j.contains("alice"))
    d.alice = instruments_from_json(j["alice"], key_path(path, "alice"));
  if (j.contains("bob"))
    d.bob = instruments_from_json(j["bob"], key_path(path, "bob"));
  if (j.contains("charlie"))
    d.charlie = povm_from_json(j["charlie"], key_path(path, "charlie"));
  return d;
}

json read_json_file(const std::string &file) {
  std::ifstream in(file, std::ios::binary);
  if (!in)
    throw InputError(file + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error &e) {
    throw InputError(file + ": " + e.what());
  }
}

std::string fnv1a64(const std::string &bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace causalis::cli
