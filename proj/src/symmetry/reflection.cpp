#include "skelrun/symmetry/reflection.hpp"

#include <istream>
#include <iterator>
#include <sstream>

namespace skelrun::symmetry {

ReflectionMap ReflectionMap::identity(int state_dim, int action_dim) {
  ReflectionMap m;
  for (int i = 0; i < state_dim; ++i) {
    m.state_perm.push_back(i);
    m.state_sign.push_back(1);
  }
  for (int i = 0; i < action_dim; ++i) m.action_perm.push_back(i);
  return m;
}

namespace {

void check_involution(const std::vector<int>& perm, const char* name) {
  const int n = static_cast<int>(perm.size());
  for (int i = 0; i < n; ++i) {
    const int j = perm[i];
    if (j < 0 || j >= n) {
      throw ReflectionError(std::string(name) + ": index " + std::to_string(j) + " out of range");
    }
    if (perm[j] != i) {
      throw ReflectionError(std::string(name) + ": not an involution at " + std::to_string(i));
    }
  }
}

}  // namespace

void ReflectionMap::validate() const {
  if (state_sign.size() != state_perm.size()) {
    throw ReflectionError("state_sign and state_perm differ in length");
  }
  check_involution(state_perm, "state_perm");
  check_involution(action_perm, "action_perm");
  for (std::size_t i = 0; i < state_sign.size(); ++i) {
    if (state_sign[i] != 1 && state_sign[i] != -1) throw ReflectionError("state_sign must be +-1");
    if (state_sign[state_perm[i]] != state_sign[i]) {
      throw ReflectionError("state_sign not invariant under state_perm at " + std::to_string(i));
    }
  }
}

std::vector<double> reflect_state(std::span<const double> s, const ReflectionMap& m) {
  if (s.size() != m.state_perm.size()) throw ReflectionError("reflect_state: length mismatch");
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v = s[m.state_perm[i]];
    out[i] = m.state_sign[i] < 0 ? -v : v;
  }
  return out;
}

std::vector<double> reflect_action(std::span<const double> a, const ReflectionMap& m) {
  if (a.size() != m.action_perm.size()) throw ReflectionError("reflect_action: length mismatch");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[m.action_perm[i]];
  return out;
}

Transition reflect_transition(const Transition& t, const ReflectionMap& m) {
  return Transition{reflect_state(t.state, m), reflect_action(t.action, m), t.reward,
                    reflect_state(t.next_state, m), t.terminal};
}

std::vector<Transition> augment_batch(std::span<const Transition> batch, const ReflectionMap& m) {
  if (batch.empty()) throw std::invalid_argument("augment_batch: empty batch");
  std::vector<Transition> out;
  out.reserve(batch.size() * 2);
  out.insert(out.end(), batch.begin(), batch.end());
  for (const Transition& t : batch) out.push_back(reflect_transition(t, m));
  return out;
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> parse_row(const std::string& line) {
  std::istringstream ss(line);
  std::vector<int> row;
  std::string tok;
  while (ss >> tok) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(tok, &used);
    } catch (const std::exception&) {
      throw ReflectionError("reflection map: bad integer '" + tok + "'");
    }
    if (used != tok.size()) throw ReflectionError("reflection map: bad integer '" + tok + "'");
    row.push_back(v);
  }
  return row;
}

}  // namespace

std::string format_reflection(const ReflectionMap& m) {
  return join(m.state_perm) + "\n" + join(m.state_sign) + "\n" + join(m.action_perm) + "\n";
}

ReflectionMap parse_reflection(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::vector<int>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line.front() == '#') continue;
    rows.push_back(parse_row(line));
  }
  if (rows.size() != 3) {
    throw ReflectionError("reflection map: expected 3 rows, got " + std::to_string(rows.size()));
  }
  ReflectionMap m{rows[0], rows[1], rows[2]};
  m.validate();
  return m;
}

ReflectionMap load_reflection(std::istream& in, int state_dim, int action_dim) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  ReflectionMap m = parse_reflection(text);
  if (m.state_dim() != state_dim || m.action_dim() != action_dim) {
    throw ReflectionError("reflection map dims do not match the environment descriptor");
  }
  return m;
}

}  // namespace skelrun::symmetry
