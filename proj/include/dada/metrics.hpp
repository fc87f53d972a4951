#pragma once

#include <string>
#include <vector>

namespace dada {

enum class Phase { pretrain, cls, adv, eval };

std::string phase_name(Phase p);
Phase parse_phase(const std::string& s);

struct MetricsRecord {
  long step = 0;
  int epoch = 0;
  Phase phase = Phase::pretrain;
  std::string name;
  double value = 0.0;
};

/// Line-delimited `step,epoch,phase,name,value`, full precision.
void save_metrics(const std::vector<MetricsRecord>& records,
                  const std::string& path);
std::vector<MetricsRecord> load_metrics(const std::string& path);

}  // namespace dada
