package com.example.clock;

import android.widget.TimePicker;

public class ClockActivity {
    private TimePicker timePicker;

    public int readHour() {
        int hour = timePicker.getCurrentHour();
        return hour;
    }
}
