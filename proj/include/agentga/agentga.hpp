#pragma once

#include "agentga/app.hpp"
#include "agentga/checkpoint.hpp"
#include "agentga/config.hpp"
#include "agentga/context.hpp"
#include "agentga/direction.hpp"
#include "agentga/engine.hpp"
#include "agentga/event_log.hpp"
#include "agentga/executor.hpp"
#include "agentga/external_executor.hpp"
#include "agentga/hedge.hpp"
#include "agentga/lineage.hpp"
#include "agentga/operators.hpp"
#include "agentga/pool.hpp"
#include "agentga/simulated_executor.hpp"
#include "agentga/workspace.hpp"
