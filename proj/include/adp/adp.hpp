#pragma once
// Everything except the HTTP layer, which pulls in httplib.h; include
// adp/service_http.hpp separately for that.

#include "adp/geometry.hpp"
#include "adp/rng.hpp"
#include "adp/map_model.hpp"
#include "adp/map_io.hpp"
#include "adp/map_gen.hpp"
#include "adp/task_env.hpp"
#include "adp/landscape.hpp"
#include "adp/planner.hpp"
#include "adp/agent.hpp"
#include "adp/trial_record.hpp"
#include "adp/metrics.hpp"
#include "adp/harness.hpp"
#include "adp/service.hpp"
