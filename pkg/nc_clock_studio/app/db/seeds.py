from sqlalchemy.orm import Session
from app.db import crud
from app.services.netcalc.clocks import PRESETS, PRESET_DESCRIPTIONS
from app.services.netcalc.numbers import fmt

def seed_envelope_presets(db: Session):
    """Insert the named clock envelopes; existing rows keep user edits."""
    for name, env in PRESETS.items():
        if crud.get_preset(db, name) is not None:
            continue
        crud.upsert_preset(
            db,
            name,
            rho=fmt(env.rho),
            eta=fmt(env.eta),
            delta=fmt(env.delta) if env.synchronized else None,
            description=PRESET_DESCRIPTIONS.get(name)
        )
