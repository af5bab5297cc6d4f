import json

from app.core.config import settings
from app.core.errors import EXIT_OK, EXIT_VERIFICATION_FAILED
from app.schemas.bounds import BoundResult, TheoremTag
from app.main import main


def test_verify_poschl_teller(mocker, tmp_path, capsys):
    """Test the verify command with history and fuzz CSV files"""
    mocker.patch.object(settings, "FUZZ_TRIALS", 5)
    target = tmp_path / "pt.csv"

    code = main(
        ["verify", "--problem", "poschl_teller", "--s", "1,inf", "--eta", "2",
         "--format", "csv", "--output", str(target), "--seed", "3"]
    )

    assert code == EXIT_OK
    history = target.read_text(encoding="utf-8").splitlines()
    assert history[0] == "L,n,lambda_min"
    assert len(history) >= 5
    fuzz = (tmp_path / "pt.fuzz.csv").read_text(encoding="utf-8").splitlines()
    assert fuzz[0] == "trial_seed,inequality,lhs,rhs"
    assert all(3 <= int(line.split(",")[0]) < 8 for line in fuzz[1:])


def test_verify_text(mocker, capsys):
    """Test the text verdict"""
    mocker.patch.object(settings, "FUZZ_TRIALS", 5)

    code = main(
        ["verify", "--problem", "square_well_1", "--s", "1", "--eta", "2", "--format", "text"]
    )
    out = capsys.readouterr().out

    assert code == EXIT_OK
    assert out.endswith("PASS\n")


def test_verify_without_convergence(mocker, capsys):
    """Test exit 0 when the bounds sit under an unsettled oracle"""
    mocker.patch.object(settings, "FUZZ_TRIALS", 5)
    mocker.patch.object(settings, "ORACLE_MAX_L", 8.0)

    code = main(["verify", "--problem", "free", "--s", "1", "--eta", "2"])
    payload = json.loads(capsys.readouterr().out)

    assert code == EXIT_OK
    assert payload["oracle_converged"] is False
    assert payload["agreement"] == "consistent_unconverged"


def test_verify_bound_above_oracle(mocker, capsys):
    """Test exit 3 when a bound exceeds the oracle"""
    mocker.patch.object(settings, "FUZZ_TRIALS", 5)
    mocker.patch.object(settings, "ORACLE_MAX_L", 8.0)
    too_high = BoundResult(
        theorem=TheoremTag.PROP, bound=0.0, verdict="nonnegative", applicable=True
    )
    mocker.patch("app.services.verification.evaluate_bounds", return_value=[too_high])

    code = main(["verify", "--problem", "square_well_1", "--format", "text"])
    out = capsys.readouterr().out

    assert code == EXIT_VERIFICATION_FAILED
    assert "agreement: above" in out
    assert out.endswith("FAIL\n")


def test_verify_growing_p(mocker, capsys):
    """Test exit 0 for the nonnegative p = 1 + x^2 problem"""
    mocker.patch.object(settings, "FUZZ_TRIALS", 5)

    code = main(["verify", "--problem", "growing_p", "--s", "1,2", "--eta", "1,2"])
    payload = json.loads(capsys.readouterr().out)

    assert code == EXIT_OK
    assert payload["best"]["theorem"] == "prop"
    assert payload["agreement"] in ("below", "consistent_unconverged")
