#pragma once

#include "rulescreen/aggregate.hpp"
#include "rulescreen/backtest.hpp"
#include "rulescreen/config.hpp"
#include "rulescreen/date.hpp"
#include "rulescreen/error.hpp"
#include "rulescreen/io.hpp"
#include "rulescreen/model.hpp"
#include "rulescreen/panel.hpp"
#include "rulescreen/rulegen.hpp"
#include "rulescreen/rules.hpp"
#include "rulescreen/synth.hpp"
#include "rulescreen/walk_forward.hpp"
