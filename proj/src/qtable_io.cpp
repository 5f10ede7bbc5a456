// Text persistence for QTable. Layout (one record per line, fields separated
// by single spaces, reals as C99 hexadecimal floats so values are bit-exact):
//
//   KDNSIM-QTABLE 1
//   states <S>
//   actions <A>
//   features <6 feature names>
//   action_set <A action names>
//   bins <feature> <k> <k boundaries>        (6 lines, feature order)
//   hyper alpha <a> gamma <g> epsilon0 <e> epsilon_min <m> epsilon_decay <d> episodes <n> ticks_per_episode <t>
//   values
//   <S lines of A reals>
//   visits
//   <S lines of A unsigned integers>
//   end
//
// See docs/qtable-format.md.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kdnsim/errors.hpp"
#include "kdnsim/knowledge_plane.hpp"

namespace kdnsim {

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(std::string_view expect_tag) {
    std::string line;
    if (!std::getline(in_, line)) throw ParseError("q-table truncated at line " + std::to_string(line_ + 1));
    ++line_;
    std::istringstream ss(line);
    if (!expect_tag.empty()) {
      std::string tag;
      ss >> tag;
      if (tag != expect_tag)
        throw ParseError("q-table line " + std::to_string(line_) + ": expected '" +
                         std::string(expect_tag) + "', got '" + tag + "'");
    }
    return ss;
  }

  int line() const { return line_; }

 private:
  std::istream& in_;
  int line_ = 0;
};

double read_real(std::istringstream& ss, const LineReader& r) {
  std::string tok;
  if (!(ss >> tok)) throw ParseError("q-table line " + std::to_string(r.line()) + ": missing number");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || !std::isfinite(v))
    throw ParseError("q-table line " + std::to_string(r.line()) + ": bad number '" + tok + "'");
  return v;
}

template <typename Int>
Int read_int(std::istringstream& ss, const LineReader& r) {
  std::string tok;
  if (!(ss >> tok)) throw ParseError("q-table line " + std::to_string(r.line()) + ": missing integer");
  char* end = nullptr;
  const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (tok.empty() || tok[0] == '-' || end != tok.c_str() + tok.size())
    throw ParseError("q-table line " + std::to_string(r.line()) + ": bad integer '" + tok + "'");
  return static_cast<Int>(v);
}

void expect_keyword(std::istringstream& ss, std::string_view word, const LineReader& r) {
  std::string tok;
  ss >> tok;
  if (tok != word)
    throw ParseError("q-table line " + std::to_string(r.line()) + ": expected '" +
                     std::string(word) + "'");
}

void expect_end_of_line(std::istringstream& ss, const LineReader& r) {
  std::string extra;
  if (ss >> extra)
    throw ParseError("q-table line " + std::to_string(r.line()) + ": unexpected '" + extra + "'");
}

}  // namespace

void save_qtable(const QTable& q, const QTableHeader& header, std::ostream& out) {
  out << kQTableMagic << ' ' << kQTableVersion << '\n';
  out << "states " << q.states() << '\n';
  out << "actions " << q.actions() << '\n';
  out << "features";
  for (auto name : kFeatureNames) out << ' ' << name;
  out << '\n' << "action_set";
  for (std::size_t a = 0; a < q.actions(); ++a)
    out << ' ' << (a < kActionNames.size() ? std::string(kActionNames[a]) : "a" + std::to_string(a));
  out << '\n';
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    const auto& b = header.bins.boundaries[f];
    out << "bins " << kFeatureNames[f] << ' ' << b.size();
    for (double x : b) out << ' ' << hex(x);
    out << '\n';
  }
  const auto& hp = header.hyper;
  out << "hyper alpha " << hex(hp.alpha) << " gamma " << hex(hp.gamma) << " epsilon0 "
      << hex(hp.epsilon0) << " epsilon_min " << hex(hp.epsilon_min) << " epsilon_decay "
      << hex(hp.epsilon_decay) << " episodes " << hp.episodes << " ticks_per_episode "
      << hp.ticks_per_episode << '\n';
  out << "values\n";
  for (std::size_t s = 0; s < q.states(); ++s) {
    for (std::size_t a = 0; a < q.actions(); ++a) out << (a ? " " : "") << hex(q.value(s, a));
    out << '\n';
  }
  out << "visits\n";
  for (std::size_t s = 0; s < q.states(); ++s) {
    for (std::size_t a = 0; a < q.actions(); ++a) out << (a ? " " : "") << q.visits(s, a);
    out << '\n';
  }
  out << "end\n";
  if (!out) throw IoError("failed writing q-table");
}

void save_qtable(const QTable& q, const QTableHeader& header, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  save_qtable(q, header, out);
}

LoadedQTable load_qtable(std::istream& in) {
  LineReader r(in);

  {
    auto ss = r.next(kQTableMagic);
    const int version = read_int<int>(ss, r);
    if (version != kQTableVersion)
      throw IncompatibleTable("q-table version " + std::to_string(version) + " unsupported");
  }
  std::size_t states = 0;
  std::size_t actions = 0;
  {
    auto ss = r.next("states");
    states = read_int<std::size_t>(ss, r);
  }
  {
    auto ss = r.next("actions");
    actions = read_int<std::size_t>(ss, r);
  }
  {
    auto ss = r.next("features");
    for (auto name : kFeatureNames) {
      std::string tok;
      ss >> tok;
      if (tok != name) throw IncompatibleTable("q-table feature order differs at '" + tok + "'");
    }
    expect_end_of_line(ss, r);
  }
  {
    auto ss = r.next("action_set");
    if (actions != static_cast<std::size_t>(kActionCount))
      throw IncompatibleTable("q-table has " + std::to_string(actions) + " actions, expected " +
                              std::to_string(kActionCount));
    for (auto name : kActionNames) {
      std::string tok;
      ss >> tok;
      if (tok != name) throw IncompatibleTable("q-table action set differs at '" + tok + "'");
    }
    expect_end_of_line(ss, r);
  }

  QTableHeader header;
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    auto ss = r.next("bins");
    expect_keyword(ss, kFeatureNames[f], r);
    const auto k = read_int<std::size_t>(ss, r);
    if (k > 1024) throw ParseError("q-table line " + std::to_string(r.line()) + ": too many bins");
    std::vector<double> b(k);
    for (auto& x : b) x = read_real(ss, r);
    expect_end_of_line(ss, r);
    header.bins.boundaries[f] = std::move(b);
  }
  try {
    validate(header.bins);
  } catch (const InvalidParameter& e) {
    throw ParseError(std::string("q-table bins invalid: ") + e.what());
  }
  if (header.bins.state_count() != states)
    throw IncompatibleTable("q-table declares " + std::to_string(states) +
                            " states but its bins give " +
                            std::to_string(header.bins.state_count()));
  {
    auto ss = r.next("hyper");
    auto& hp = header.hyper;
    expect_keyword(ss, "alpha", r);
    hp.alpha = read_real(ss, r);
    expect_keyword(ss, "gamma", r);
    hp.gamma = read_real(ss, r);
    expect_keyword(ss, "epsilon0", r);
    hp.epsilon0 = read_real(ss, r);
    expect_keyword(ss, "epsilon_min", r);
    hp.epsilon_min = read_real(ss, r);
    expect_keyword(ss, "epsilon_decay", r);
    hp.epsilon_decay = read_real(ss, r);
    expect_keyword(ss, "episodes", r);
    hp.episodes = read_int<int>(ss, r);
    expect_keyword(ss, "ticks_per_episode", r);
    hp.ticks_per_episode = read_int<int>(ss, r);
    expect_end_of_line(ss, r);
  }

  QTable table(states, actions);
  r.next("values");
  for (std::size_t s = 0; s < states; ++s) {
    auto ss = r.next("");
    for (std::size_t a = 0; a < actions; ++a) table.set_value(s, a, read_real(ss, r));
    expect_end_of_line(ss, r);
  }
  r.next("visits");
  for (std::size_t s = 0; s < states; ++s) {
    auto ss = r.next("");
    for (std::size_t a = 0; a < actions; ++a)
      table.visit_counts()(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(a)) =
          read_int<std::uint64_t>(ss, r);
    expect_end_of_line(ss, r);
  }
  r.next("end");
  return {std::move(table), std::move(header)};
}

LoadedQTable load_qtable(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return load_qtable(in);
}

LoadedQTable load_qtable(const std::filesystem::path& path, const StateBins& expected_bins) {
  auto loaded = load_qtable(path);
  if (loaded.table.states() != expected_bins.state_count())
    throw IncompatibleTable("q-table has " + std::to_string(loaded.table.states()) +
                            " states, scenario expects " +
                            std::to_string(expected_bins.state_count()));
  if (!(loaded.header.bins == expected_bins))
    throw IncompatibleTable("q-table bin boundaries differ from the scenario's");
  return loaded;
}

}  // namespace kdnsim
